"""Scoring for open-loop plans and closed-loop rollouts.

Open loop compares each planned trajectory against the logged truth:
displacement errors (average / final), wrapped absolute heading errors
(average / final), a miss gate on the worst displacement, and a 0-100 score

    score = 100 * (1 - miss_rate) * mean_f[ mean(exp(-ade_f/sd), exp(-fde_f/sd),
                                                  exp(-ahe_f/sh), exp(-fhe_f/sh)) ]

with distance scale sd and heading scale sh. A perfect replay scores exactly
100.0.

Closed loop is gated hard on collisions: any footprint overlap scores 0.
Otherwise the score is 100 * mean(drivable compliance, progress ratio vs the
expert log, comfort fraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import VehicleParams
from .geometry import rectangle_corners, rectangles_overlap, wrap_angle
from .scenario import Scenario, Trajectory
from .simulate import ClosedLoopLog, FrameEval


@dataclass(frozen=True)
class MetricParams:
    miss_threshold: float = 8.0
    sigma_distance: float = 2.0
    sigma_heading: float = 0.5
    comfort_accel: float = 3.0
    comfort_jerk: float = 5.0


def displacement_errors(planned: Trajectory, truth: Trajectory) -> tuple[float, float]:
    """(average, final) Euclidean displacement between pose sequences."""
    if len(planned.poses) != len(truth.poses):
        raise ValueError("trajectories must have equal length")
    dists = [
        math.hypot(p.x - q.x, p.y - q.y) for p, q in zip(planned.poses, truth.poses)
    ]
    return sum(dists) / len(dists), dists[-1]


def heading_errors(planned: Trajectory, truth: Trajectory) -> tuple[float, float]:
    """(average, final) absolute heading error, wrapped into [0, pi]."""
    if len(planned.poses) != len(truth.poses):
        raise ValueError("trajectories must have equal length")
    errs = [abs(wrap_angle(p.yaw - q.yaw)) for p, q in zip(planned.poses, truth.poses)]
    return sum(errs) / len(errs), errs[-1]


def miss_rate(missed: Sequence[bool]) -> float:
    """Fraction of missed frames; 1.0 when there are no frames at all."""
    if not missed:
        return 1.0
    return sum(missed) / len(missed)


@dataclass(frozen=True)
class OpenLoopResult:
    frames: int
    missed: int
    planner_failures: int
    ade: float
    fde: float
    ahe: float
    fhe: float
    miss_rate: float
    score: float


def open_loop_score(frames: Sequence[FrameEval], params: MetricParams) -> OpenLoopResult:
    """Score a set of open-loop frame evaluations.

    A frame is missed if the planner failed or its worst displacement exceeds
    the miss threshold. Error aggregates and the per-frame score average run
    over the frames that produced a plan; if none did, errors report as 0.0
    and the miss gate zeroes the score.
    """
    missed_flags: list[bool] = []
    ades: list[float] = []
    fdes: list[float] = []
    ahes: list[float] = []
    fhes: list[float] = []
    frame_scores: list[float] = []
    failures = 0
    for f in frames:
        if f.planned is None or f.failed:
            failures += 1
            missed_flags.append(True)
            continue
        worst = max(
            math.hypot(p.x - q.x, p.y - q.y)
            for p, q in zip(f.planned.poses, f.truth.poses)
        )
        missed_flags.append(worst > params.miss_threshold)
        ade, fde = displacement_errors(f.planned, f.truth)
        ahe, fhe = heading_errors(f.planned, f.truth)
        ades.append(ade)
        fdes.append(fde)
        ahes.append(ahe)
        fhes.append(fhe)
        frame_scores.append(
            (
                math.exp(-ade / params.sigma_distance)
                + math.exp(-fde / params.sigma_distance)
                + math.exp(-ahe / params.sigma_heading)
                + math.exp(-fhe / params.sigma_heading)
            )
            / 4.0
        )
    rate = miss_rate(missed_flags)
    if frame_scores:
        score = 100.0 * (1.0 - rate) * (sum(frame_scores) / len(frame_scores))
    else:
        score = 0.0
    mean = lambda xs: sum(xs) / len(xs) if xs else 0.0  # noqa: E731
    return OpenLoopResult(
        frames=len(frames),
        missed=sum(missed_flags),
        planner_failures=failures,
        ade=mean(ades),
        fde=mean(fdes),
        ahe=mean(ahes),
        fhe=mean(fhes),
        miss_rate=rate,
        score=score,
    )


@dataclass(frozen=True)
class ClosedLoopResult:
    ticks: int
    planner_failures: int
    collision_free: bool
    drivable_compliance: float
    progress_ratio: float
    comfort: float
    score: float


def closed_loop_score(
    log: ClosedLoopLog,
    scenario: Scenario,
    vehicle: VehicleParams,
    params: MetricParams,
) -> ClosedLoopResult:
    """Score a closed-loop rollout against its scenario."""
    ticks = log.ticks
    if not ticks:
        raise ValueError("closed-loop log has no ticks")
    ego_boxes = rectangle_corners(
        np.array([tk.x for tk in ticks]),
        np.array([tk.y for tk in ticks]),
        np.array([tk.yaw for tk in ticks]),
        vehicle.length,
        vehicle.width,
    )

    dims = {track.agent_id: (track.length, track.width) for track in scenario.agents}
    collision = False
    series: dict[str, list[tuple[int, float, float, float]]] = {}
    for i, tk in enumerate(ticks):
        for a in tk.agents:
            series.setdefault(a.agent_id, []).append((i, a.x, a.y, a.yaw))
    for agent_id, samples in series.items():
        length, width = dims[agent_id]
        idx = np.array([s[0] for s in samples])
        boxes = rectangle_corners(
            np.array([s[1] for s in samples]),
            np.array([s[2] for s in samples]),
            np.array([s[3] for s in samples]),
            length,
            width,
        )
        if bool(rectangles_overlap(ego_boxes[idx], boxes).any()):
            collision = True
            break

    corridor = scenario.map.corridor
    corners_flat = ego_boxes.reshape(-1, 2)
    _, lat = corridor.project_points(corners_flat)
    inside = (np.abs(lat).reshape(len(ticks), 4) <= scenario.map.lane_half_width + 1e-9).all(
        axis=1
    )
    drivable = float(inside.mean())

    s_start, _ = corridor.project(ticks[0].x, ticks[0].y)
    s_end, _ = corridor.project(ticks[-1].x, ticks[-1].y)
    progress = s_end - s_start
    times = scenario.frame_times()
    i0 = scenario.history_steps
    t_last = ticks[-1].t
    i1 = i0
    for j in range(i0, len(times)):
        if times[j] <= t_last + 1e-6:
            i1 = j
    e0, _ = corridor.project(
        scenario.ego.motion.poses[i0].x, scenario.ego.motion.poses[i0].y
    )
    e1, _ = corridor.project(
        scenario.ego.motion.poses[i1].x, scenario.ego.motion.poses[i1].y
    )
    expert = e1 - e0
    if expert < 0.1:
        progress_ratio = 1.0
    else:
        progress_ratio = min(max(progress / expert, 0.0), 1.0)

    accels = [tk.accel for tk in ticks[:-1]]
    ok = 0
    for i, a in enumerate(accels):
        fine = abs(a) <= params.comfort_accel
        if i >= 1 and abs(a - accels[i - 1]) / log.substep > params.comfort_jerk:
            fine = False
        ok += fine
    comfort = ok / len(accels) if accels else 1.0

    if collision:
        score = 0.0
    else:
        score = 100.0 * (drivable + progress_ratio + comfort) / 3.0
    return ClosedLoopResult(
        ticks=len(ticks),
        planner_failures=log.failures,
        collision_free=not collision,
        drivable_compliance=drivable,
        progress_ratio=progress_ratio,
        comfort=comfort,
        score=score,
    )
