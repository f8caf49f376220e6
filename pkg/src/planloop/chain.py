"""Rule-based four-stage reasoning planner.

Each planning call runs the same fixed chain and records its conclusions in a
structured trace plus a short narrative (one line per stage):

    1. maneuver   -- pick a preliminary intent from the instruction and the
                     upcoming corridor curvature
    2. collision  -- roll the ego forward along the lane at constant speed and
                     classify every observed agent by minimum footprint
                     distance (critical / hazard / none)
    3. traffic    -- map the light state to a signal decision and compute the
                     speed cap (no further acceleration once ego is at 95% of
                     the limit)
    4. action     -- integrate the stages by fixed priority: critical hazard,
                     then red light, then hazard/yield slowdown (50%), then
                     caution (80%), then nominal

and finally decodes the action into a drivable fixed-horizon trajectory along
the corridor. Everything is deterministic: identical contexts produce
bit-identical traces and trajectories.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlLimits
from .geometry import polyline_arclength, rectangle_corners, rectangle_distance
from .scenario import (
    GoalType,
    Instruction,
    PlanningContext,
    Pose,
    Trajectory,
    TrafficLight,
)


class ManeuverIntent(str, enum.Enum):
    KEEP_LANE = "keep_lane"
    LANE_CHANGE_LEFT = "lane_change_left"
    LANE_CHANGE_RIGHT = "lane_change_right"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    YIELD = "yield"
    STOP = "stop"


class HazardLevel(str, enum.Enum):
    NONE = "none"
    HAZARD = "hazard"
    CRITICAL = "critical"


class TrafficSignal(str, enum.Enum):
    FULL_STOP = "full_stop"
    CAUTION = "caution"
    PROCEED = "proceed"


@dataclass(frozen=True)
class HazardAssessment:
    agent_id: str
    level: HazardLevel
    min_distance: float
    time_of_min: float


@dataclass(frozen=True)
class TrafficAssessment:
    signal: TrafficSignal
    speed_cap: float
    stop_at_s: float | None


@dataclass(frozen=True)
class FinalAction:
    """Integrated decision. ``stop_at_s`` is a centerline arclength; a stop
    with no arclength brakes in place (at the comfort rate, or at the maximum
    rate when ``hard_stop`` is set by a critical hazard)."""

    intent: ManeuverIntent
    target_speed: float
    stop_at_s: float | None = None
    hard_stop: bool = False


@dataclass(frozen=True)
class ReasoningTrace:
    intent: ManeuverIntent
    hazards: tuple[HazardAssessment, ...]
    traffic: TrafficAssessment
    action: FinalAction
    narrative: str


@dataclass(frozen=True)
class ChainPlan:
    trace: ReasoningTrace
    trajectory: Trajectory


@dataclass(frozen=True)
class ChainConfig:
    hazard_distance: float = 3.0
    critical_distance: float = 1.5
    hazard_slowdown: float = 0.5
    caution_slowdown: float = 0.8
    suppress_fraction: float = 0.95
    curvature_threshold: float = 0.1
    curve_lookahead: float = 40.0
    curvature_window: float = 1.0
    lane_change_duration: float = 4.0
    min_maneuver_speed: float = 2.0
    stop_buffer: float = 0.5
    comfort_decel: float = 2.0
    path_step: float = 0.25


_GOAL_TO_INTENT = {
    GoalType.TURN_LEFT: ManeuverIntent.TURN_LEFT,
    GoalType.TURN_RIGHT: ManeuverIntent.TURN_RIGHT,
    GoalType.LANE_CHANGE_LEFT: ManeuverIntent.LANE_CHANGE_LEFT,
    GoalType.LANE_CHANGE_RIGHT: ManeuverIntent.LANE_CHANGE_RIGHT,
    GoalType.STOP: ManeuverIntent.STOP,
    GoalType.YIELD: ManeuverIntent.YIELD,
}


def preliminary_plan(context: PlanningContext, config: ChainConfig) -> ManeuverIntent:
    """Stage 1: instruction goal plus corridor curvature ahead.

    follow_lane becomes a turn intent when the corridor bends more sharply
    than the curvature threshold within the lookahead, otherwise keep_lane.
    """
    goal = context.instruction.goal
    if goal is not GoalType.FOLLOW_LANE:
        return _GOAL_TO_INTENT[goal]
    corridor = context.map.corridor
    s0, _ = corridor.project(context.ego.pose.x, context.ego.pose.y)
    s_end = min(corridor.length, s0 + config.curve_lookahead)
    best = 0.0
    for s in np.arange(s0, s_end + 1e-9, 1.0):
        kappa = corridor.curvature_at(float(s), window=config.curvature_window)
        if abs(kappa) > abs(best):
            best = kappa
    if abs(best) > config.curvature_threshold:
        return ManeuverIntent.TURN_LEFT if best > 0.0 else ManeuverIntent.TURN_RIGHT
    return ManeuverIntent.KEEP_LANE


class _RefPath:
    """Dense offset polyline ahead of the ego, parameterized by its own
    arclength u. Keeps the source centerline arclength per sample so stop
    lines can be mapped from centerline coordinates into u."""

    def __init__(self, context: PlanningContext, lateral_target: float | None, config: ChainConfig) -> None:
        corridor = context.map.corridor
        ego = context.ego.pose
        s0, d0 = corridor.project(ego.x, ego.y)
        # The profile may accelerate up to the speed limit, so size the path
        # for whichever is faster, current speed or the limit.
        v = max(context.ego.velocity, context.map.speed_limit, config.min_maneuver_speed)
        reach = v * 10.0 + 20.0
        s_grid = np.arange(s0, min(corridor.length, s0 + reach) + config.path_step, config.path_step)
        s_grid = np.clip(s_grid, 0.0, corridor.length)
        if len(s_grid) < 2:
            s_grid = np.array([s0, corridor.length])

        if lateral_target is None:
            offsets = np.full(len(s_grid), d0)
        else:
            blend_len = max(config.min_maneuver_speed, context.ego.velocity) * config.lane_change_duration
            tau = np.clip((s_grid - s0) / blend_len, 0.0, 1.0)
            sigma = 10.0 * tau**3 - 15.0 * tau**4 + 6.0 * tau**5
            offsets = d0 + (lateral_target - d0) * sigma

        pts = corridor.point_at(s_grid) + offsets[:, None] * corridor.normal_at(s_grid)
        # Drop accidental duplicates (can happen at the corridor end clamp).
        keep = np.concatenate([[True], np.hypot(*(np.diff(pts, axis=0).T)) > 1e-9])
        self.points = pts[keep]
        self.s_grid = s_grid[keep]
        if len(self.points) < 2:
            direction = np.array([math.cos(ego.yaw), math.sin(ego.yaw)])
            self.points = np.vstack([self.points[0], self.points[0] + direction])
            self.s_grid = np.array([s_grid[0], s_grid[0] + 1.0])
        self.u_grid = polyline_arclength(self.points)
        seg = np.diff(self.points, axis=0)
        self.angles = np.arctan2(seg[:, 1], seg[:, 0])

    @property
    def length(self) -> float:
        return float(self.u_grid[-1])

    def u_of_centerline_s(self, s: float) -> float:
        return float(np.interp(s, self.s_grid, self.u_grid))

    def pose_at(self, u: float) -> Pose:
        u = min(max(u, 0.0), self.length)
        i = int(np.clip(np.searchsorted(self.u_grid, u, side="right") - 1, 0, len(self.angles) - 1))
        du = self.u_grid[i + 1] - self.u_grid[i]
        frac = (u - self.u_grid[i]) / du if du > 0.0 else 0.0
        p = self.points[i] + frac * (self.points[i + 1] - self.points[i])
        return Pose(float(p[0]), float(p[1]), float(self.angles[i]))


def _keep_lane_rollout(
    context: PlanningContext, config: ChainConfig, horizon_steps: int, dt: float
) -> list[Pose]:
    path = _RefPath(context, None, config)
    v = context.ego.velocity
    return [path.pose_at(v * k * dt) for k in range(horizon_steps + 1)]


def predict_collisions(
    context: PlanningContext, config: ChainConfig, horizon_steps: int, dt: float
) -> tuple[HazardAssessment, ...]:
    """Stage 2: minimum footprint distance per agent over the rollout.

    The ego keeps its lane at constant speed; each agent follows its
    predicted trajectory. Shorter predictions are assessed over the common
    prefix. Output is sorted ascending by distance, ties by agent id.
    """
    rollout = _keep_lane_rollout(context, config, horizon_steps, dt)
    ego_xy = np.array([[p.x, p.y] for p in rollout])
    ego_yaw = np.array([p.yaw for p in rollout])
    ego_boxes = rectangle_corners(
        ego_xy[:, 0], ego_xy[:, 1], ego_yaw, context.ego.length, context.ego.width
    )
    out = []
    for obs in context.observations:
        prefix = min(len(rollout), len(obs.predicted.poses))
        poses = obs.predicted.poses[:prefix]
        boxes = rectangle_corners(
            np.array([p.x for p in poses]),
            np.array([p.y for p in poses]),
            np.array([p.yaw for p in poses]),
            obs.length,
            obs.width,
        )
        dists = rectangle_distance(ego_boxes[:prefix], boxes)
        k = int(np.argmin(dists))
        d = float(dists[k])
        if d <= config.critical_distance:
            level = HazardLevel.CRITICAL
        elif d <= config.hazard_distance:
            level = HazardLevel.HAZARD
        else:
            level = HazardLevel.NONE
        out.append(HazardAssessment(obs.agent_id, level, d, k * dt))
    out.sort(key=lambda h: (h.min_distance, h.agent_id))
    return tuple(out)


def assess_traffic(context: PlanningContext, config: ChainConfig) -> TrafficAssessment:
    """Stage 3: light state to signal decision plus the speed cap.

    The cap is the speed limit until ego reaches 95% of it; from there the
    cap freezes at the current speed (never above the limit), which forbids
    further acceleration.
    """
    limit = context.map.speed_limit
    v = context.ego.velocity
    if v < config.suppress_fraction * limit:
        cap = limit
    else:
        cap = min(v, limit)
    light = context.map.traffic_light
    if light is TrafficLight.RED:
        return TrafficAssessment(TrafficSignal.FULL_STOP, cap, context.map.stop_line_s)
    if light is TrafficLight.YELLOW:
        return TrafficAssessment(TrafficSignal.CAUTION, cap, None)
    return TrafficAssessment(TrafficSignal.PROCEED, cap, None)


def integrate_action(
    intent: ManeuverIntent,
    hazards: tuple[HazardAssessment, ...],
    traffic: TrafficAssessment,
    config: ChainConfig,
) -> FinalAction:
    """Stage 4: combine the stages by fixed priority."""
    if any(h.level is HazardLevel.CRITICAL for h in hazards):
        return FinalAction(ManeuverIntent.STOP, 0.0, None, hard_stop=True)
    if traffic.signal is TrafficSignal.FULL_STOP:
        return FinalAction(ManeuverIntent.STOP, 0.0, traffic.stop_at_s)
    if intent is ManeuverIntent.STOP:
        return FinalAction(ManeuverIntent.STOP, 0.0, None)
    if intent is ManeuverIntent.YIELD or any(h.level is HazardLevel.HAZARD for h in hazards):
        return FinalAction(intent, traffic.speed_cap * config.hazard_slowdown)
    if traffic.signal is TrafficSignal.CAUTION:
        return FinalAction(intent, traffic.speed_cap * config.caution_slowdown)
    return FinalAction(intent, traffic.speed_cap)


def generate_trajectory(
    context: PlanningContext,
    action: FinalAction,
    config: ChainConfig,
    horizon_steps: int,
    dt: float,
    limits: ControlLimits,
) -> Trajectory:
    """Decode the final action into a fixed-horizon trajectory.

    The path is an offset polyline along the corridor (lane changes blend the
    lateral offset with a quintic ramp over roughly lane_change_duration
    seconds of travel). The speed profile walks that path by arclength:
    trapezoidal toward the target speed, or a braking envelope into the stop
    point (comfort rate when distance allows, up to the hard limit when not).
    Chord lengths never exceed arclength steps, so finite-difference speeds
    respect the profile's cap exactly.
    """
    half_width = context.map.lane_half_width
    lateral_target: float | None = None
    if action.intent is ManeuverIntent.LANE_CHANGE_LEFT:
        lateral_target = 2.0 * half_width
    elif action.intent is ManeuverIntent.LANE_CHANGE_RIGHT:
        lateral_target = -2.0 * half_width
    path = _RefPath(context, lateral_target, config)

    v0 = context.ego.velocity
    cruise = min(v0, context.map.speed_limit)
    max_decel = abs(limits.accel_min)
    fine = 5
    dt_f = dt / fine

    u_stop: float | None = None
    brake_rate = max_decel
    if action.intent is ManeuverIntent.STOP or action.stop_at_s is not None:
        if action.hard_stop:
            u_stop = 0.0 if v0 <= 0.0 else v0 * v0 / (2.0 * max_decel)
            brake_rate = max_decel
        elif action.stop_at_s is None:
            u_stop = 0.0 if v0 <= 0.0 else v0 * v0 / (2.0 * config.comfort_decel)
            brake_rate = config.comfort_decel
        else:
            # Stop so the front bumper (not the center) rests a buffer short
            # of the line.
            u_stop = (
                path.u_of_centerline_s(action.stop_at_s)
                - config.stop_buffer
                - context.ego.length / 2.0
            )
            if u_stop <= 0.0:
                u_stop = 0.0 if v0 <= 0.0 else v0 * v0 / (2.0 * max_decel)
                brake_rate = max_decel
            else:
                needed = v0 * v0 / (2.0 * u_stop) if v0 > 0.0 else 0.0
                brake_rate = min(max(needed, config.comfort_decel), max_decel)

    us = [0.0]
    u = 0.0
    v = v0
    for k in range(horizon_steps * fine):
        if u_stop is not None:
            ahead = u_stop - (u + v * dt_f)
            envelope = math.sqrt(2.0 * brake_rate * ahead) if ahead > 0.0 else 0.0
            v = min(cruise, envelope) if v0 > 0.0 else 0.0
            if v < 1e-3:
                v = 0.0
        else:
            target = action.target_speed
            if v < target:
                v = min(target, v + limits.accel_max * dt_f)
            elif v > target:
                v = max(target, v - config.comfort_decel * dt_f)
        u = u + v * dt_f
        if (k + 1) % fine == 0:
            us.append(u)
    poses = tuple(path.pose_at(ui) for ui in us)
    return Trajectory(poses=poses, dt=dt, start_time=context.timestamp)


def _narrative(
    intent: ManeuverIntent,
    hazards: tuple[HazardAssessment, ...],
    traffic: TrafficAssessment,
    action: FinalAction,
    goal: GoalType,
    truncated: tuple[str, ...],
) -> str:
    if hazards:
        worst = hazards[0]
        collision = (
            f"agents={len(hazards)} worst={worst.agent_id} "
            f"min_distance={worst.min_distance:.3f}m at_t={worst.time_of_min:.1f}s "
            f"level={worst.level.value}"
        )
        if truncated:
            collision += f" prefix_only={','.join(truncated)}"
    else:
        collision = "agents=0 clear"
    stop_s = "none" if traffic.stop_at_s is None else f"{traffic.stop_at_s:.2f}"
    action_stop = "none" if action.stop_at_s is None else f"{action.stop_at_s:.2f}"
    lines = [
        f"STAGE 1 maneuver: intent={intent.value} goal={goal.value}",
        f"STAGE 2 collision: {collision}",
        f"STAGE 3 traffic: signal={traffic.signal.value} speed_cap={traffic.speed_cap:.2f} stop_at_s={stop_s}",
        f"STAGE 4 action: intent={action.intent.value} target_speed={action.target_speed:.2f} "
        f"stop_at_s={action_stop} hard_stop={str(action.hard_stop).lower()}",
    ]
    return "\n".join(lines)


def plan(
    context: PlanningContext,
    config: ChainConfig,
    horizon_steps: int,
    dt: float,
    limits: ControlLimits,
) -> ChainPlan:
    """Run all four stages and decode the trajectory."""
    intent = preliminary_plan(context, config)
    hazards = predict_collisions(context, config, horizon_steps, dt)
    traffic = assess_traffic(context, config)
    action = integrate_action(intent, hazards, traffic, config)
    trajectory = generate_trajectory(context, action, config, horizon_steps, dt, limits)
    truncated = tuple(
        obs.agent_id
        for obs in context.observations
        if len(obs.predicted.poses) < horizon_steps + 1
    )
    trace = ReasoningTrace(
        intent=intent,
        hazards=hazards,
        traffic=traffic,
        action=action,
        narrative=_narrative(intent, hazards, traffic, action, context.instruction.goal, truncated),
    )
    return ChainPlan(trace=trace, trajectory=trajectory)
