"""Simulation engine: open-loop frame evaluation and closed-loop rollouts.

Open loop asks the planner for a trajectory at every log frame that still has
a full horizon of ground truth ahead and records plan vs truth. Closed loop
integrates the kinematic bicycle at a fine substep, replanning on a fixed
interval and tracking the active plan with LQR; background agents replay logs
or run IDM depending on the mode. A failed replan holds the previous plan and
overlays a comfort-rate deceleration until the next successful one (with no
previous plan, a synthesized straight comfort stop is tracked instead).

Logs serialize to JSONL: one header line, then one line per frame or tick.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .dynamics import (
    Control,
    ControlLimits,
    LqrConfig,
    LqrGains,
    VehicleParams,
    VehicleState,
    kinematic_step,
    solve_lqr_gains,
    track_trajectory,
)
from .scenario import (
    DEFAULT_AGENT_CAP,
    AgentCategory,
    AgentObservation,
    AgentTrack,
    EgoState,
    MapContext,
    PlanningContext,
    Pose,
    Scenario,
    SystemDescription,
    Trajectory,
    agent_observation_at,
    select_nearest_agents,
)
from .traffic import AgentMode, IdmParams, SimAgent, step_background


class SimMode(str, enum.Enum):
    OPEN_LOOP = "open_loop"
    CLOSED_NONREACTIVE = "closed_nonreactive"
    CLOSED_REACTIVE = "closed_reactive"


@dataclass(frozen=True)
class SimulationConfig:
    mode: SimMode = SimMode.CLOSED_NONREACTIVE
    replan_interval: float = 0.5
    substep: float = 0.1
    duration: float | None = None
    comfort_decel: float = 2.0


class PlannerError(RuntimeError):
    """Raised by planners when no trajectory can be produced for a context."""

    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class PlanResult:
    trajectory: Trajectory
    trace_text: str | None = None


class Planner(Protocol):
    name: str

    def plan(self, context: PlanningContext) -> PlanResult: ...


@dataclass(frozen=True)
class FrameEval:
    t: float
    truth: Trajectory
    planned: Trajectory | None
    failed: bool = False
    reason: str | None = None
    trace: str | None = None


@dataclass(frozen=True)
class OpenLoopLog:
    scenario_id: str
    planner: str
    resolution: float
    horizon_steps: int
    frames: tuple[FrameEval, ...]

    @property
    def failures(self) -> int:
        return sum(1 for f in self.frames if f.failed)


@dataclass(frozen=True)
class AgentTick:
    agent_id: str
    x: float
    y: float
    yaw: float
    v: float


@dataclass(frozen=True)
class Tick:
    t: float
    x: float
    y: float
    yaw: float
    v: float
    accel: float
    steer: float
    failed: bool = False
    agents: tuple[AgentTick, ...] = ()
    trace: str | None = None


@dataclass(frozen=True)
class ClosedLoopLog:
    scenario_id: str
    planner: str
    mode: SimMode
    substep: float
    replan_interval: float
    start_time: float
    ticks: tuple[Tick, ...]
    failures: int = 0


def _near_integer(value: float, name: str) -> int:
    k = round(value)
    if k < 1 or abs(value - k) > 1e-6:
        raise ValueError(f"{name} must be a positive integer multiple, got {value!r}")
    return int(k)


# ---------------------------------------------------------------------------
# Open loop
# ---------------------------------------------------------------------------


def run_open_loop(
    scenario: Scenario,
    planner: Planner,
    vehicle: VehicleParams,
    cap: int = DEFAULT_AGENT_CAP,
) -> OpenLoopLog:
    """Evaluate the planner at every frame with a full horizon of truth ahead."""
    from .scenario import planning_context_at

    h = scenario.history_steps
    horizon = scenario.plan_steps
    times = scenario.frame_times()
    frames: list[FrameEval] = []
    for i in range(h, scenario.n_frames - horizon):
        ctx = planning_context_at(scenario, i, vehicle, cap)
        truth = Trajectory(
            poses=tuple(scenario.ego.motion.poses[i : i + horizon + 1]),
            dt=scenario.resolution,
            start_time=times[i],
        )
        try:
            result = planner.plan(ctx)
            frames.append(FrameEval(times[i], truth, result.trajectory, trace=result.trace_text))
        except PlannerError as exc:
            frames.append(
                FrameEval(times[i], truth, None, failed=True, reason=exc.reason)
            )
    return OpenLoopLog(
        scenario_id=scenario.scenario_id,
        planner=planner.name,
        resolution=scenario.resolution,
        horizon_steps=horizon,
        frames=tuple(frames),
    )


# ---------------------------------------------------------------------------
# Closed loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepEnv:
    """Everything a single simulation step needs besides the mutable state."""

    map: MapContext
    tracks: Mapping[str, AgentTrack]
    idm: IdmParams
    limits: ControlLimits
    wheelbase: float
    ego_length: float
    substep: float
    fallback: bool = False
    comfort_decel: float = 2.0


@dataclass(frozen=True)
class StepResult:
    state: VehicleState
    control: Control
    agents: tuple[SimAgent, ...]


def step_simulation(
    state: VehicleState,
    plan: Trajectory,
    agents: Sequence[SimAgent],
    t: float,
    gains: LqrGains,
    env: StepEnv,
) -> StepResult:
    """Advance one substep: track the plan, move the background, integrate.

    Pure function of its inputs. Background agents advance from the same
    snapshot as the ego (Jacobi update).
    """
    control = track_trajectory(state, plan, gains, t, env.limits, env.wheelbase)
    if env.fallback:
        control = Control(
            acceleration=max(min(control.acceleration, -env.comfort_decel), env.limits.accel_min),
            steering_angle=control.steering_angle,
        )
    new_agents = step_background(
        agents, state, env.ego_length, env.map, env.tracks, t, env.substep, env.idm
    )
    new_state = kinematic_step(state, control, env.wheelbase, env.substep)
    return StepResult(state=new_state, control=control, agents=new_agents)


def synth_stop_plan(
    state: VehicleState, horizon_steps: int, dt: float, decel: float, start_time: float
) -> Trajectory:
    """Straight-ahead comfort stop used when no plan has ever been produced."""
    poses = []
    x, y, v = state.x, state.y, state.v
    for _ in range(horizon_steps + 1):
        poses.append(Pose(x, y, state.yaw))
        x += v * math.cos(state.yaw) * dt
        y += v * math.sin(state.yaw) * dt
        v = max(0.0, v - decel * dt)
    return Trajectory(poses=tuple(poses), dt=dt, start_time=start_time)


def _constant_velocity_prediction(
    agent: SimAgent, t: float, steps: int, dt: float
) -> Trajectory:
    poses = tuple(
        Pose(
            agent.x + agent.v * math.cos(agent.yaw) * k * dt,
            agent.y + agent.v * math.sin(agent.yaw) * k * dt,
            agent.yaw,
        )
        for k in range(steps + 1)
    )
    return Trajectory(poses=poses, dt=dt, start_time=t)


def _closed_context(
    scenario: Scenario,
    state: VehicleState,
    accel: float,
    history: Sequence[Pose],
    agents: Sequence[SimAgent],
    t: float,
    vehicle: VehicleParams,
    cap: int,
    mode: SimMode,
) -> PlanningContext:
    ego_pose = Pose(state.x, state.y, state.yaw)
    hist = Trajectory(
        poses=tuple(history),
        dt=scenario.resolution,
        start_time=t - (len(history) - 1) * scenario.resolution,
    )
    ego = EgoState(
        pose=ego_pose,
        velocity=state.v,
        acceleration=accel,
        length=vehicle.length,
        width=vehicle.width,
        history=hist,
    )
    observations: list[AgentObservation] = []
    for agent in agents:
        track = scenario_track(scenario, agent.agent_id)
        if mode is SimMode.CLOSED_REACTIVE and agent.mode is AgentMode.REACTIVE_IDM:
            obs = AgentObservation(
                agent_id=agent.agent_id,
                category=agent.category,
                length=agent.length,
                width=agent.width,
                pose=Pose(agent.x, agent.y, agent.yaw),
                velocity=agent.v,
                predicted=_constant_velocity_prediction(
                    agent, t, scenario.plan_steps, scenario.resolution
                ),
            )
        else:
            obs = agent_observation_at(track, t, scenario.plan_steps, scenario.resolution)
        observations.append(obs)
    system = SystemDescription(
        heading_ccw=True,
        yaw_zero_axis="x",
        length=vehicle.length,
        width=vehicle.width,
        wheelbase=vehicle.wheelbase,
    )
    return PlanningContext(
        timestamp=t,
        ego=ego,
        observations=select_nearest_agents(observations, ego_pose, cap),
        map=scenario.map,
        instruction=scenario.instruction,
        system=system,
    )


def scenario_track(scenario: Scenario, agent_id: str) -> AgentTrack:
    for track in scenario.agents:
        if track.agent_id == agent_id:
            return track
    raise KeyError(agent_id)


def run_closed_loop(
    scenario: Scenario,
    planner: Planner,
    config: SimulationConfig,
    vehicle: VehicleParams,
    lqr: LqrConfig,
    idm: IdmParams,
    cap: int = DEFAULT_AGENT_CAP,
) -> ClosedLoopLog:
    """Closed-loop rollout from the first frame with a full history window."""
    res_every = _near_integer(scenario.resolution / config.substep, "resolution/substep")
    replan_every = _near_integer(config.replan_interval / config.substep, "replan/substep")
    h = scenario.history_steps
    times = scenario.frame_times()
    if h >= scenario.n_frames:
        raise ValueError("scenario too short for its history horizon")
    t0 = times[h]
    t_end = times[-1]
    if config.duration is not None:
        t_end = min(t_end, t0 + config.duration)
    n_sub = int(round((t_end - t0) / config.substep))
    if n_sub <= 0:
        raise ValueError("scenario too short to simulate")

    state = VehicleState(
        x=scenario.ego.motion.poses[h].x,
        y=scenario.ego.motion.poses[h].y,
        yaw=scenario.ego.motion.poses[h].yaw,
        v=scenario.ego.speeds[h],
    )
    last_accel = scenario.ego.accels[h]
    history = list(scenario.ego.motion.poses[max(0, h - scenario.history_steps) : h + 1])

    tracks = {track.agent_id: track for track in scenario.agents}
    agents: tuple[SimAgent, ...] = tuple(
        SimAgent(
            agent_id=track.agent_id,
            category=track.category,
            length=track.length,
            width=track.width,
            x=track.motion.sample(t0).x,
            y=track.motion.sample(t0).y,
            yaw=track.motion.sample(t0).yaw,
            v=track.speed_at(t0),
            mode=(
                AgentMode.REACTIVE_IDM
                if config.mode is SimMode.CLOSED_REACTIVE
                and track.category is AgentCategory.VEHICLE
                else AgentMode.LOG_REPLAY
            ),
        )
        for track in scenario.agents
        if track.covers(t0)
    )

    plan: Trajectory | None = None
    gains = None
    fallback = False
    failures = 0
    gain_horizon = max(replan_every, int(round(scenario.plan_horizon / config.substep)))
    ticks: list[Tick] = []

    for k in range(n_sub):
        t = t0 + k * config.substep
        replan_failed = False
        trace_text: str | None = None
        if k % replan_every == 0:
            ctx = _closed_context(
                scenario, state, last_accel, history, agents, t, vehicle, cap, config.mode
            )
            try:
                result = planner.plan(ctx)
                plan = result.trajectory
                trace_text = result.trace_text
                fallback = False
            except PlannerError:
                failures += 1
                replan_failed = True
                fallback = True
                if plan is None:
                    plan = synth_stop_plan(
                        state, scenario.plan_steps, scenario.resolution, config.comfort_decel, t
                    )
            gains = solve_lqr_gains(
                replace(
                    lqr,
                    nominal_speed=max(1.0, state.v),
                    wheelbase=vehicle.wheelbase,
                    dt=config.substep,
                    horizon_steps=gain_horizon,
                )
            )
        env = StepEnv(
            map=scenario.map,
            tracks=tracks,
            idm=idm,
            limits=vehicle.limits,
            wheelbase=vehicle.wheelbase,
            ego_length=vehicle.length,
            substep=config.substep,
            fallback=fallback,
            comfort_decel=config.comfort_decel,
        )
        step = step_simulation(state, plan, agents, t, gains, env)
        ticks.append(
            Tick(
                t=t,
                x=state.x,
                y=state.y,
                yaw=state.yaw,
                v=state.v,
                accel=step.control.acceleration,
                steer=step.control.steering_angle,
                failed=replan_failed,
                agents=tuple(AgentTick(a.agent_id, a.x, a.y, a.yaw, a.v) for a in agents),
                trace=trace_text,
            )
        )
        state = step.state
        agents = step.agents
        last_accel = step.control.acceleration
        if (k + 1) % res_every == 0:
            history.append(Pose(state.x, state.y, state.yaw))
            if len(history) > scenario.history_steps + 1:
                history.pop(0)

    ticks.append(
        Tick(
            t=t0 + n_sub * config.substep,
            x=state.x,
            y=state.y,
            yaw=state.yaw,
            v=state.v,
            accel=0.0,
            steer=0.0,
            agents=tuple(AgentTick(a.agent_id, a.x, a.y, a.yaw, a.v) for a in agents),
        )
    )
    return ClosedLoopLog(
        scenario_id=scenario.scenario_id,
        planner=planner.name,
        mode=config.mode,
        substep=config.substep,
        replan_interval=config.replan_interval,
        start_time=t0,
        ticks=tuple(ticks),
        failures=failures,
    )


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------


def _poses_to_list(traj: Trajectory | None) -> list[list[float]] | None:
    if traj is None:
        return None
    return [[p.x, p.y, p.yaw] for p in traj.poses]


def write_log_jsonl(log: OpenLoopLog | ClosedLoopLog, path: str | Path) -> None:
    path = Path(path)
    lines: list[str] = []
    if isinstance(log, OpenLoopLog):
        lines.append(
            json.dumps(
                {
                    "kind": "open_loop",
                    "scenario": log.scenario_id,
                    "planner": log.planner,
                    "resolution": log.resolution,
                    "horizon_steps": log.horizon_steps,
                },
                sort_keys=True,
            )
        )
        for f in log.frames:
            rec = {
                "t": f.t,
                "failed": f.failed,
                "reason": f.reason,
                "planned": _poses_to_list(f.planned),
                "truth": _poses_to_list(f.truth),
            }
            if f.trace is not None:
                rec["trace"] = f.trace
            lines.append(json.dumps(rec, sort_keys=True))
    else:
        lines.append(
            json.dumps(
                {
                    "kind": "closed_loop",
                    "scenario": log.scenario_id,
                    "planner": log.planner,
                    "mode": log.mode.value,
                    "substep": log.substep,
                    "replan_interval": log.replan_interval,
                    "start_time": log.start_time,
                    "failures": log.failures,
                },
                sort_keys=True,
            )
        )
        for tick in log.ticks:
            rec = {
                "t": tick.t,
                "x": tick.x,
                "y": tick.y,
                "yaw": tick.yaw,
                "v": tick.v,
                "accel": tick.accel,
                "steer": tick.steer,
                "failed": tick.failed,
                "agents": [[a.agent_id, a.x, a.y, a.yaw, a.v] for a in tick.agents],
            }
            if tick.trace is not None:
                rec["trace"] = tick.trace
            lines.append(json.dumps(rec, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")


def _traj_from_list(
    data: list[list[float]] | None, dt: float, start: float
) -> Trajectory | None:
    if data is None:
        return None
    return Trajectory(
        poses=tuple(Pose(x, y, yaw) for x, y, yaw in data), dt=dt, start_time=start
    )


def read_log_jsonl(path: str | Path) -> OpenLoopLog | ClosedLoopLog:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty log file")
    header = json.loads(lines[0])
    kind = header.get("kind")
    if kind == "open_loop":
        frames = []
        for line in lines[1:]:
            rec = json.loads(line)
            frames.append(
                FrameEval(
                    t=rec["t"],
                    truth=_traj_from_list(rec["truth"], header["resolution"], rec["t"]),
                    planned=_traj_from_list(rec["planned"], header["resolution"], rec["t"]),
                    failed=rec["failed"],
                    reason=rec.get("reason"),
                    trace=rec.get("trace"),
                )
            )
        return OpenLoopLog(
            scenario_id=header["scenario"],
            planner=header["planner"],
            resolution=header["resolution"],
            horizon_steps=header["horizon_steps"],
            frames=tuple(frames),
        )
    if kind == "closed_loop":
        ticks = []
        for line in lines[1:]:
            rec = json.loads(line)
            ticks.append(
                Tick(
                    t=rec["t"],
                    x=rec["x"],
                    y=rec["y"],
                    yaw=rec["yaw"],
                    v=rec["v"],
                    accel=rec["accel"],
                    steer=rec["steer"],
                    failed=rec["failed"],
                    agents=tuple(AgentTick(*a) for a in rec["agents"]),
                    trace=rec.get("trace"),
                )
            )
        return ClosedLoopLog(
            scenario_id=header["scenario"],
            planner=header["planner"],
            mode=SimMode(header["mode"]),
            substep=header["substep"],
            replan_interval=header["replan_interval"],
            start_time=header["start_time"],
            ticks=tuple(ticks),
            failures=header.get("failures", 0),
        )
    raise ValueError(f"{path}: unknown log kind {kind!r}")
