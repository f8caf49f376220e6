"""Scenario model: domain types, JSON loading/validation, and frame transforms.

A scenario is a logged drive: a lane corridor with map state, an ego log at a
fixed resolution, and agent logs on the same time grid. Planning contexts are
cut out of a scenario at a frame index (history window + agent observations
with predicted futures) and can be moved between the world frame and the
ego-centric frame.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Mapping, Sequence

import numpy as np

from .geometry import Corridor, wrap_angle

if TYPE_CHECKING:
    from .dynamics import VehicleParams

DEFAULT_AGENT_CAP = 32

_TIME_SNAP = 1e-6


class ScenarioError(ValueError):
    """Raised for malformed scenario files; message carries the field path."""


class TrafficLight(str, enum.Enum):
    NONE = "none"
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"


class AgentCategory(str, enum.Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


class GoalType(str, enum.Enum):
    FOLLOW_LANE = "follow_lane"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    LANE_CHANGE_LEFT = "lane_change_left"
    LANE_CHANGE_RIGHT = "lane_change_right"
    STOP = "stop"
    YIELD = "yield"


@dataclass(frozen=True)
class Pose:
    """Planar pose. Yaw is normalized to (-pi, pi] on construction."""

    x: float
    y: float
    yaw: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


def interpolate_pose(a: Pose, b: Pose, frac: float) -> Pose:
    """Linear position blend with shortest-arc yaw interpolation."""
    yaw = a.yaw + frac * wrap_angle(b.yaw - a.yaw)
    return Pose(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y), yaw)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled pose sequence starting at ``start_time``."""

    poses: tuple[Pose, ...]
    dt: float
    start_time: float

    def __post_init__(self) -> None:
        if len(self.poses) < 1:
            raise ValueError("trajectory needs at least one pose")
        if self.dt <= 0.0:
            raise ValueError("trajectory dt must be positive")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def end_time(self) -> float:
        return self.start_time + (len(self.poses) - 1) * self.dt

    def times(self) -> tuple[float, ...]:
        return tuple(self.start_time + i * self.dt for i in range(len(self.poses)))

    def xy_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.poses], dtype=float)

    def yaw_array(self) -> np.ndarray:
        return np.array([p.yaw for p in self.poses], dtype=float)

    def sample(self, t: float) -> Pose:
        """Pose at time t: exact at knots, linear between, clamped outside."""
        r = (t - self.start_time) / self.dt
        k = int(round(r))
        if abs(r - k) < _TIME_SNAP:
            return self.poses[min(max(k, 0), len(self.poses) - 1)]
        if r <= 0.0:
            return self.poses[0]
        if r >= len(self.poses) - 1:
            return self.poses[-1]
        lo = int(math.floor(r))
        return interpolate_pose(self.poses[lo], self.poses[lo + 1], r - lo)


@dataclass(frozen=True)
class EgoState:
    pose: Pose
    velocity: float
    acceleration: float
    length: float
    width: float
    history: Trajectory


@dataclass(frozen=True)
class AgentObservation:
    agent_id: str
    category: AgentCategory
    length: float
    width: float
    pose: Pose
    velocity: float
    predicted: Trajectory


@dataclass(frozen=True)
class MapContext:
    """Lane corridor plus map state (light, stop line, speed limit)."""

    centerline: tuple[tuple[float, float], ...]
    lane_half_width: float
    traffic_light: TrafficLight
    stop_line_s: float | None
    speed_limit: float

    @cached_property
    def corridor(self) -> Corridor:
        return Corridor(np.array(self.centerline, dtype=float))


@dataclass(frozen=True)
class Instruction:
    goal: GoalType
    free_text: str = ""


@dataclass(frozen=True)
class SystemDescription:
    """Motion-system conventions mirrored into the serialized scene text."""

    heading_ccw: bool
    yaw_zero_axis: str
    length: float
    width: float
    wheelbase: float


@dataclass(frozen=True)
class PlanningContext:
    timestamp: float
    ego: EgoState
    observations: tuple[AgentObservation, ...]
    map: MapContext
    instruction: Instruction
    system: SystemDescription


@dataclass(frozen=True)
class FrameAgent:
    agent_id: str
    x: float
    y: float
    yaw: float
    v: float


@dataclass(frozen=True)
class Frame:
    t: float
    ego_x: float
    ego_y: float
    ego_yaw: float
    ego_v: float
    ego_a: float
    agents: tuple[FrameAgent, ...]


@dataclass(frozen=True)
class AgentTrack:
    agent_id: str
    category: AgentCategory
    length: float
    width: float
    motion: Trajectory
    speeds: tuple[float, ...]

    def covers(self, t: float) -> bool:
        return self.motion.start_time - _TIME_SNAP <= t <= self.motion.end_time + _TIME_SNAP

    def speed_at(self, t: float) -> float:
        r = (t - self.motion.start_time) / self.motion.dt
        k = int(round(r))
        if abs(r - k) < _TIME_SNAP:
            return self.speeds[min(max(k, 0), len(self.speeds) - 1)]
        if r <= 0.0:
            return self.speeds[0]
        if r >= len(self.speeds) - 1:
            return self.speeds[-1]
        lo = int(math.floor(r))
        return self.speeds[lo] + (r - lo) * (self.speeds[lo + 1] - self.speeds[lo])


@dataclass(frozen=True)
class EgoTrack:
    motion: Trajectory
    speeds: tuple[float, ...]
    accels: tuple[float, ...]


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    resolution: float
    history_horizon: float
    plan_horizon: float
    map: MapContext
    ego: EgoTrack
    agents: tuple[AgentTrack, ...]
    instruction: Instruction
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def n_frames(self) -> int:
        return len(self.ego.motion)

    @property
    def history_steps(self) -> int:
        return int(round(self.history_horizon / self.resolution))

    @property
    def plan_steps(self) -> int:
        return int(round(self.plan_horizon / self.resolution))

    def frame_times(self) -> tuple[float, ...]:
        return self.ego.motion.times()

    @cached_property
    def frames(self) -> tuple[Frame, ...]:
        out = []
        for i, t in enumerate(self.frame_times()):
            pose = self.ego.motion.poses[i]
            agents = tuple(
                FrameAgent(
                    a.agent_id,
                    a.motion.sample(t).x,
                    a.motion.sample(t).y,
                    a.motion.sample(t).yaw,
                    a.speed_at(t),
                )
                for a in self.agents
                if a.covers(t)
            )
            out.append(Frame(t, pose.x, pose.y, pose.yaw, self.ego.speeds[i], self.ego.accels[i], agents))
        return tuple(out)


# ---------------------------------------------------------------------------
# JSON loading
# ---------------------------------------------------------------------------

_TOP_KEYS = {
    "id",
    "resolution_s",
    "history_horizon_s",
    "plan_horizon_s",
    "map",
    "ego_log",
    "agents",
    "instruction",
}
_MAP_KEYS = {"centerline", "lane_half_width_m", "traffic_light", "stop_line_s", "speed_limit_mps"}
_EGO_ENTRY_KEYS = {"t", "x", "y", "yaw", "v", "a"}
_AGENT_KEYS = {"id", "category", "length_m", "width_m", "log"}
_AGENT_ENTRY_KEYS = {"t", "x", "y", "yaw", "v"}
_INSTRUCTION_KEYS = {"goal", "free_text"}


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number(data: Mapping, key: str, path: str) -> float:
    if key not in data:
        raise ScenarioError(f"{path}.{key}: missing required key")
    v = data[key]
    if not _is_number(v):
        raise ScenarioError(f"{path}.{key}: expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise ScenarioError(f"{path}.{key}: value must be finite")
    return float(v)


def _check_keys(data: Mapping, allowed: set[str], path: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ScenarioError(f"{path}: unknown key '{unknown[0]}'")


def _check_grid(times: Sequence[float], resolution: float, path: str) -> None:
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            raise ScenarioError(f"{path}[{i}].t: timestamps must be strictly increasing")
        if abs((times[i] - times[i - 1]) - resolution) > 1e-6:
            raise ScenarioError(
                f"{path}[{i}].t: frame spacing {times[i] - times[i - 1]:.6g} does not "
                f"match resolution_s {resolution:.6g}"
            )


def _number_at(entry: Mapping, key: str, entry_path: str) -> float:
    if key not in entry:
        raise ScenarioError(f"{entry_path}.{key}: missing required key")
    v = entry[key]
    if not _is_number(v):
        raise ScenarioError(f"{entry_path}.{key}: expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise ScenarioError(f"{entry_path}.{key}: value must be finite")
    return float(v)


def _parse_map(data: Any, path: str) -> MapContext:
    if not isinstance(data, Mapping):
        raise ScenarioError(f"{path}: expected an object")
    _check_keys(data, _MAP_KEYS, path)
    raw_line = data.get("centerline")
    if not isinstance(raw_line, list) or len(raw_line) < 2:
        raise ScenarioError(f"{path}.centerline: need a list of at least two points")
    pts: list[tuple[float, float]] = []
    for i, p in enumerate(raw_line):
        if (
            not isinstance(p, list)
            or len(p) != 2
            or not all(_is_number(c) and math.isfinite(c) for c in p)
        ):
            raise ScenarioError(f"{path}.centerline[{i}]: expected [x, y] with finite numbers")
        pts.append((float(p[0]), float(p[1])))
    for i in range(1, len(pts)):
        if math.dist(pts[i], pts[i - 1]) <= 0.0:
            raise ScenarioError(f"{path}.centerline[{i}]: consecutive points must be distinct")
    half_width = _number(data, "lane_half_width_m", path)
    if half_width <= 0.0:
        raise ScenarioError(f"{path}.lane_half_width_m: must be positive")
    light_raw = data.get("traffic_light", "none")
    try:
        light = TrafficLight(light_raw)
    except ValueError:
        raise ScenarioError(
            f"{path}.traffic_light: '{light_raw}' is not one of "
            f"{sorted(m.value for m in TrafficLight)}"
        ) from None
    stop_line_s: float | None = None
    if light is TrafficLight.NONE:
        if "stop_line_s" in data:
            raise ScenarioError(f"{path}.stop_line_s: only allowed when traffic_light is set")
    else:
        stop_line_s = _number(data, "stop_line_s", path)
    speed_limit = _number(data, "speed_limit_mps", path)
    if speed_limit <= 0.0:
        raise ScenarioError(f"{path}.speed_limit_mps: must be positive")
    ctx = MapContext(
        centerline=tuple(pts),
        lane_half_width=half_width,
        traffic_light=light,
        stop_line_s=stop_line_s,
        speed_limit=speed_limit,
    )
    if stop_line_s is not None and not (0.0 <= stop_line_s <= ctx.corridor.length):
        raise ScenarioError(
            f"{path}.stop_line_s: {stop_line_s:.6g} is outside the corridor "
            f"[0, {ctx.corridor.length:.6g}]"
        )
    return ctx


def parse_scenario(data: Any, source: str = "<memory>") -> Scenario:
    """Validate a decoded JSON object and build a Scenario.

    Raises ScenarioError naming the offending field path on the first
    violation (unknown keys, missing keys, bad types, non-finite numbers,
    ragged time grids).
    """
    if not isinstance(data, Mapping):
        raise ScenarioError(f"{source}: top level must be an object")
    _check_keys(data, _TOP_KEYS, source)
    if "id" not in data:
        raise ScenarioError(f"{source}.id: missing required key")
    if not isinstance(data["id"], str) or not data["id"]:
        raise ScenarioError(f"{source}.id: expected a non-empty string")
    scenario_id = data["id"]

    resolution = float(data.get("resolution_s", 0.5))
    if not _is_number(data.get("resolution_s", 0.5)) or resolution <= 0.0:
        raise ScenarioError(f"{source}.resolution_s: must be a positive number")
    history_horizon = float(data.get("history_horizon_s", 2.0))
    if not _is_number(data.get("history_horizon_s", 2.0)) or history_horizon < 0.0:
        raise ScenarioError(f"{source}.history_horizon_s: must be a non-negative number")
    plan_horizon = float(data.get("plan_horizon_s", 8.0))
    if not _is_number(data.get("plan_horizon_s", 8.0)) or plan_horizon <= 0.0:
        raise ScenarioError(f"{source}.plan_horizon_s: must be a positive number")
    for name, horizon in (("plan_horizon_s", plan_horizon), ("history_horizon_s", history_horizon)):
        steps = horizon / resolution
        if abs(steps - round(steps)) > 1e-6:
            raise ScenarioError(f"{source}.{name}: must be an integer multiple of resolution_s")

    if "map" not in data:
        raise ScenarioError(f"{source}.map: missing required key")
    map_ctx = _parse_map(data["map"], f"{source}.map")

    if "ego_log" not in data:
        raise ScenarioError(f"{source}.ego_log: missing required key")
    raw_ego = data["ego_log"]
    if not isinstance(raw_ego, list) or not raw_ego:
        raise ScenarioError(f"{source}.ego_log: expected a non-empty list")
    ego_entries = []
    for i, entry in enumerate(raw_ego):
        path = f"{source}.ego_log[{i}]"
        if not isinstance(entry, Mapping):
            raise ScenarioError(f"{path}: expected an object")
        _check_keys(entry, _EGO_ENTRY_KEYS, path)
        rec = {k: _number_at(entry, k, path) for k in ("t", "x", "y", "yaw", "v", "a")}
        if rec["v"] < 0.0:
            raise ScenarioError(f"{path}.v: ego speed must be non-negative")
        ego_entries.append(rec)
    _check_grid([e["t"] for e in ego_entries], resolution, f"{source}.ego_log")
    ego_start = ego_entries[0]["t"]
    ego_track = EgoTrack(
        motion=Trajectory(
            poses=tuple(Pose(e["x"], e["y"], e["yaw"]) for e in ego_entries),
            dt=resolution,
            start_time=ego_start,
        ),
        speeds=tuple(e["v"] for e in ego_entries),
        accels=tuple(e["a"] for e in ego_entries),
    )

    raw_agents = data.get("agents", [])
    if not isinstance(raw_agents, list):
        raise ScenarioError(f"{source}.agents: expected a list")
    agents: list[AgentTrack] = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(raw_agents):
        path = f"{source}.agents[{i}]"
        if not isinstance(raw, Mapping):
            raise ScenarioError(f"{path}: expected an object")
        _check_keys(raw, _AGENT_KEYS, path)
        if "id" not in raw:
            raise ScenarioError(f"{path}.id: missing required key")
        if isinstance(raw["id"], bool) or not isinstance(raw["id"], (str, int)):
            raise ScenarioError(f"{path}.id: expected a string or integer")
        agent_id = str(raw["id"])
        if agent_id in seen_ids:
            raise ScenarioError(f"{path}.id: duplicate agent id '{agent_id}'")
        seen_ids.add(agent_id)
        try:
            category = AgentCategory(raw.get("category"))
        except ValueError:
            raise ScenarioError(
                f"{path}.category: '{raw.get('category')}' is not one of "
                f"{sorted(m.value for m in AgentCategory)}"
            ) from None
        length = _number(raw, "length_m", path)
        width = _number(raw, "width_m", path)
        if length <= 0.0 or width <= 0.0:
            raise ScenarioError(f"{path}: length_m and width_m must be positive")
        raw_log = raw.get("log")
        if not isinstance(raw_log, list) or not raw_log:
            raise ScenarioError(f"{path}.log: expected a non-empty list")
        entries = []
        for j, entry in enumerate(raw_log):
            epath = f"{path}.log[{j}]"
            if not isinstance(entry, Mapping):
                raise ScenarioError(f"{epath}: expected an object")
            _check_keys(entry, _AGENT_ENTRY_KEYS, epath)
            entries.append({k: _number_at(entry, k, epath) for k in ("t", "x", "y", "yaw", "v")})
        _check_grid([e["t"] for e in entries], resolution, f"{path}.log")
        offset = (entries[0]["t"] - ego_start) / resolution
        if abs(offset - round(offset)) > 1e-6:
            raise ScenarioError(f"{path}.log[0].t: not aligned to the scenario frame grid")
        agents.append(
            AgentTrack(
                agent_id=agent_id,
                category=category,
                length=length,
                width=width,
                motion=Trajectory(
                    poses=tuple(Pose(e["x"], e["y"], e["yaw"]) for e in entries),
                    dt=resolution,
                    start_time=entries[0]["t"],
                ),
                speeds=tuple(e["v"] for e in entries),
            )
        )

    raw_instr = data.get("instruction", {"goal": "follow_lane"})
    if not isinstance(raw_instr, Mapping):
        raise ScenarioError(f"{source}.instruction: expected an object")
    _check_keys(raw_instr, _INSTRUCTION_KEYS, f"{source}.instruction")
    try:
        goal = GoalType(raw_instr.get("goal", "follow_lane"))
    except ValueError:
        raise ScenarioError(
            f"{source}.instruction.goal: '{raw_instr.get('goal')}' is not one of "
            f"{sorted(m.value for m in GoalType)}"
        ) from None
    free_text = raw_instr.get("free_text", "")
    if not isinstance(free_text, str):
        raise ScenarioError(f"{source}.instruction.free_text: expected a string")

    return Scenario(
        scenario_id=scenario_id,
        resolution=resolution,
        history_horizon=history_horizon,
        plan_horizon=plan_horizon,
        map=map_ctx,
        ego=ego_track,
        agents=tuple(agents),
        instruction=Instruction(goal=goal, free_text=free_text),
        metadata={"source": source},
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate one scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario file ({exc})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(data, source=path.name)


# ---------------------------------------------------------------------------
# Frame transforms and context assembly
# ---------------------------------------------------------------------------


def pose_to_frame(p: Pose, anchor: Pose) -> Pose:
    """Express a world pose in the frame anchored at ``anchor``."""
    c = math.cos(anchor.yaw)
    s = math.sin(anchor.yaw)
    dx = p.x - anchor.x
    dy = p.y - anchor.y
    return Pose(c * dx + s * dy, -s * dx + c * dy, wrap_angle(p.yaw - anchor.yaw))


def pose_from_frame(p: Pose, anchor: Pose) -> Pose:
    """Inverse of :func:`pose_to_frame`."""
    c = math.cos(anchor.yaw)
    s = math.sin(anchor.yaw)
    return Pose(
        anchor.x + c * p.x - s * p.y,
        anchor.y + s * p.x + c * p.y,
        wrap_angle(p.yaw + anchor.yaw),
    )


def _point_to_frame(x: float, y: float, anchor: Pose) -> tuple[float, float]:
    c = math.cos(anchor.yaw)
    s = math.sin(anchor.yaw)
    dx = x - anchor.x
    dy = y - anchor.y
    return (c * dx + s * dy, -s * dx + c * dy)


def _point_from_frame(x: float, y: float, anchor: Pose) -> tuple[float, float]:
    c = math.cos(anchor.yaw)
    s = math.sin(anchor.yaw)
    return (anchor.x + c * x - s * y, anchor.y + s * x + c * y)


def transform_trajectory(traj: Trajectory, anchor: Pose, inverse: bool = False) -> Trajectory:
    fn = pose_from_frame if inverse else pose_to_frame
    return replace(traj, poses=tuple(fn(p, anchor) for p in traj.poses))


def to_ego_frame(ctx: PlanningContext) -> PlanningContext:
    """Re-anchor a planning context at the ego pose (ego exactly at origin)."""
    anchor = ctx.ego.pose
    ego = replace(
        ctx.ego,
        pose=Pose(0.0, 0.0, 0.0),
        history=transform_trajectory(ctx.ego.history, anchor),
    )
    observations = tuple(
        replace(
            obs,
            pose=pose_to_frame(obs.pose, anchor),
            predicted=transform_trajectory(obs.predicted, anchor),
        )
        for obs in ctx.observations
    )
    new_map = replace(
        ctx.map,
        centerline=tuple(_point_to_frame(x, y, anchor) for x, y in ctx.map.centerline),
    )
    return replace(ctx, ego=ego, observations=observations, map=new_map)


def from_ego_frame(ctx: PlanningContext, anchor: Pose) -> PlanningContext:
    """Map an ego-frame context back to the world frame of ``anchor``."""
    ego = replace(
        ctx.ego,
        pose=anchor,
        history=transform_trajectory(ctx.ego.history, anchor, inverse=True),
    )
    observations = tuple(
        replace(
            obs,
            pose=pose_from_frame(obs.pose, anchor),
            predicted=transform_trajectory(obs.predicted, anchor, inverse=True),
        )
        for obs in ctx.observations
    )
    new_map = replace(
        ctx.map,
        centerline=tuple(_point_from_frame(x, y, anchor) for x, y in ctx.map.centerline),
    )
    return replace(ctx, ego=ego, observations=observations, map=new_map)


def select_nearest_agents(
    observations: Iterable[AgentObservation],
    ego_pose: Pose,
    cap: int = DEFAULT_AGENT_CAP,
) -> tuple[AgentObservation, ...]:
    """Keep the ``cap`` nearest agents, sorted by distance then agent id."""
    ranked = sorted(
        observations,
        key=lambda o: (math.hypot(o.pose.x - ego_pose.x, o.pose.y - ego_pose.y), o.agent_id),
    )
    return tuple(ranked[:cap])


def resample_trajectory(traj: Trajectory, new_dt: float) -> Trajectory:
    """Resample to a commensurate timestep.

    Integer-ratio downsampling keeps every k-th pose; integer-ratio
    upsampling inserts linearly interpolated poses (shortest-arc yaw).
    Non-commensurate timesteps raise ValueError.
    """
    if new_dt <= 0.0:
        raise ValueError("new_dt must be positive")
    ratio = new_dt / traj.dt
    if abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1:
        k = int(round(ratio))
        if k == 1:
            return traj
        return replace(traj, poses=traj.poses[::k], dt=new_dt)
    inverse = traj.dt / new_dt
    if abs(inverse - round(inverse)) < 1e-9 and round(inverse) >= 2:
        k = int(round(inverse))
        poses: list[Pose] = []
        for i in range(len(traj.poses) - 1):
            a, b = traj.poses[i], traj.poses[i + 1]
            poses.extend(interpolate_pose(a, b, j / k) for j in range(k))
        poses.append(traj.poses[-1])
        return replace(traj, poses=tuple(poses), dt=new_dt)
    raise ValueError(f"new_dt {new_dt!r} is not commensurate with trajectory dt {traj.dt!r}")


def agent_observation_at(
    track: AgentTrack, t: float, plan_steps: int, resolution: float
) -> AgentObservation:
    """Observation of one logged agent at time t with its logged future."""
    end = track.motion.end_time
    avail = int(math.floor((end - t) / resolution + _TIME_SNAP))
    steps = max(0, min(plan_steps, avail))
    poses = tuple(track.motion.sample(t + k * resolution) for k in range(steps + 1))
    return AgentObservation(
        agent_id=track.agent_id,
        category=track.category,
        length=track.length,
        width=track.width,
        pose=track.motion.sample(t),
        velocity=track.speed_at(t),
        predicted=Trajectory(poses=poses, dt=resolution, start_time=t),
    )


def planning_context_at(
    scenario: Scenario,
    frame_index: int,
    vehicle: "VehicleParams",
    cap: int = DEFAULT_AGENT_CAP,
) -> PlanningContext:
    """Cut a world-frame planning context out of a scenario at a frame.

    The frame index must leave a full history window inside the log
    (frame_index >= history steps).
    """
    h = scenario.history_steps
    if frame_index < h or frame_index >= scenario.n_frames:
        raise ValueError(
            f"frame_index {frame_index} outside [{h}, {scenario.n_frames - 1}] "
            "(history window must fit inside the log)"
        )
    times = scenario.frame_times()
    t = times[frame_index]
    ego_poses = scenario.ego.motion.poses[frame_index - h : frame_index + 1]
    history = Trajectory(poses=tuple(ego_poses), dt=scenario.resolution, start_time=times[frame_index - h])
    ego = EgoState(
        pose=scenario.ego.motion.poses[frame_index],
        velocity=scenario.ego.speeds[frame_index],
        acceleration=scenario.ego.accels[frame_index],
        length=vehicle.length,
        width=vehicle.width,
        history=history,
    )
    observations = [
        agent_observation_at(track, t, scenario.plan_steps, scenario.resolution)
        for track in scenario.agents
        if track.covers(t)
    ]
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
        observations=select_nearest_agents(observations, ego.pose, cap),
        map=scenario.map,
        instruction=scenario.instruction,
        system=system,
    )
