"""Shared builders for the test suite."""

from __future__ import annotations

import math
from pathlib import Path

from planloop.scenario import (
    AgentCategory,
    AgentObservation,
    EgoState,
    GoalType,
    Instruction,
    MapContext,
    PlanningContext,
    Pose,
    Scenario,
    SystemDescription,
    Trajectory,
    TrafficLight,
    parse_scenario,
)

REPO_ROOT = Path(__file__).resolve().parents[1]
SCENARIO_DIR = REPO_ROOT / "scenarios"
DOUBLES_DIR = Path(__file__).resolve().parent / "doubles"

FIXTURE_IDS = (
    "crossing_pedestrian",
    "curve_left",
    "green_light",
    "lead_vehicle",
    "many_agents",
    "red_light",
    "straight_free",
)


def straight_scenario_dict(
    *,
    scenario_id: str = "test",
    limit: float = 10.0,
    light: str = "none",
    stop_line_s: float | None = None,
    n_frames: int = 41,
    speed: float = 8.0,
    agents: list | None = None,
    goal: str = "follow_lane",
    centerline: list | None = None,
) -> dict:
    """A constant-speed straight-road scenario on the 0.5 s grid."""
    log = [
        {"t": k * 0.5, "x": speed * k * 0.5, "y": 0.0, "yaw": 0.0, "v": speed, "a": 0.0}
        for k in range(n_frames)
    ]
    mp: dict = {
        "centerline": centerline or [[-10.0, 0.0], [400.0, 0.0]],
        "lane_half_width_m": 2.0,
        "speed_limit_mps": limit,
        "traffic_light": light,
    }
    if stop_line_s is not None:
        mp["stop_line_s"] = stop_line_s
    return {
        "id": scenario_id,
        "map": mp,
        "ego_log": log,
        "agents": agents or [],
        "instruction": {"goal": goal},
    }


def make_scenario(**kwargs) -> Scenario:
    return parse_scenario(straight_scenario_dict(**kwargs))


def constant_agent(
    agent_id: str,
    x0: float,
    y0: float,
    vx: float,
    n_frames: int = 41,
    category: str = "vehicle",
    length: float = 4.2,
    width: float = 1.8,
    yaw: float = 0.0,
) -> dict:
    log = [
        {"t": k * 0.5, "x": x0 + vx * k * 0.5, "y": y0, "yaw": yaw, "v": abs(vx)}
        for k in range(n_frames)
    ]
    return {
        "id": agent_id,
        "category": category,
        "length_m": length,
        "width_m": width,
        "log": log,
    }


def stationary_observation(
    agent_id: str,
    x: float,
    y: float,
    *,
    length: float = 2.0,
    width: float = 2.0,
    steps: int = 16,
    dt: float = 0.5,
    start_time: float = 0.0,
    yaw: float = 0.0,
) -> AgentObservation:
    poses = tuple(Pose(x, y, yaw) for _ in range(steps + 1))
    return AgentObservation(
        agent_id=agent_id,
        category=AgentCategory.VEHICLE,
        length=length,
        width=width,
        pose=poses[0],
        velocity=0.0,
        predicted=Trajectory(poses=poses, dt=dt, start_time=start_time),
    )


def make_context(
    *,
    ego_pose: Pose = Pose(0.0, 0.0, 0.0),
    velocity: float = 0.0,
    acceleration: float = 0.0,
    ego_length: float = 4.0,
    ego_width: float = 2.0,
    wheelbase: float = 2.7,
    observations: tuple = (),
    centerline: tuple = ((-50.0, 0.0), (400.0, 0.0)),
    half_width: float = 2.0,
    light: TrafficLight = TrafficLight.NONE,
    stop_line_s: float | None = None,
    limit: float = 10.0,
    goal: GoalType = GoalType.FOLLOW_LANE,
    timestamp: float = 0.0,
) -> PlanningContext:
    """Build a planning context directly, without a scenario file."""
    history = Trajectory(
        poses=tuple(
            Pose(
                ego_pose.x - velocity * (4 - k) * 0.5 * math.cos(ego_pose.yaw),
                ego_pose.y - velocity * (4 - k) * 0.5 * math.sin(ego_pose.yaw),
                ego_pose.yaw,
            )
            for k in range(5)
        ),
        dt=0.5,
        start_time=timestamp - 2.0,
    )
    return PlanningContext(
        timestamp=timestamp,
        ego=EgoState(
            pose=ego_pose,
            velocity=velocity,
            acceleration=acceleration,
            length=ego_length,
            width=ego_width,
            history=history,
        ),
        observations=tuple(observations),
        map=MapContext(
            centerline=tuple(centerline),
            lane_half_width=half_width,
            traffic_light=light,
            stop_line_s=stop_line_s,
            speed_limit=limit,
        ),
        instruction=Instruction(goal=goal),
        system=SystemDescription(
            heading_ccw=True,
            yaw_zero_axis="x",
            length=ego_length,
            width=ego_width,
            wheelbase=wheelbase,
        ),
    )


def arc_centerline(radius: float, sweep_deg: float, *, left: bool = True, lead_in: float = 20.0):
    """Straight lead-in followed by a circular arc, 0.5 m point spacing."""
    pts = []
    s = -10.0
    while s < lead_in:
        pts.append((s, 0.0))
        s += 0.5
    sweep = math.radians(sweep_deg)
    sign = 1.0 if left else -1.0
    arc_len = radius * sweep
    k = 1
    while k * 0.5 <= arc_len:
        th = k * 0.5 / radius
        pts.append((lead_in + radius * math.sin(th), sign * radius * (1.0 - math.cos(th))))
        k += 1
    return tuple(pts)
