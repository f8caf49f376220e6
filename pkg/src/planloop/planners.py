"""Planner implementations behind the common ``plan(context)`` interface.

All planners return a PlanResult or raise PlannerError; the engine treats
both uniformly (a failed frame / a fallback tick). Available planners:

    log_replay    -- emit the ego log's own future (the expert)
    chain         -- the four-stage rule-based planner
    idm_baseline  -- corridor-following IDM longitudinal rollout
    remote        -- HTTP or child-process endpoint speaking the wire protocol
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chain as chain_mod
from .dynamics import ControlLimits
from .language import (
    Endpoint,
    PlanFailure,
    SamplingParams,
    remote_plan,
)
from .scenario import PlanningContext, Pose, Scenario, Trajectory
from .simulate import PlannerError, PlanResult
from .traffic import IdmParams, idm_acceleration


class LogReplayPlanner:
    """Replays the scenario ego log: the plan at frame i is the logged future,
    padded by holding the final pose near the end of the log."""

    name = "log_replay"

    def __init__(self, scenario: Scenario) -> None:
        self._scenario = scenario

    def plan(self, context: PlanningContext) -> PlanResult:
        sc = self._scenario
        i = int(round((context.timestamp - sc.ego.motion.start_time) / sc.resolution))
        if i < 0 or i >= sc.n_frames:
            raise PlannerError("no_log_frame", f"timestamp {context.timestamp} outside the log")
        poses = list(sc.ego.motion.poses[i : i + sc.plan_steps + 1])
        while len(poses) < sc.plan_steps + 1:
            poses.append(poses[-1])
        return PlanResult(
            trajectory=Trajectory(
                poses=tuple(poses), dt=sc.resolution, start_time=context.timestamp
            )
        )


class ChainPlanner:
    """Adapter around the four-stage chain; the narrative becomes trace text."""

    name = "chain"

    def __init__(
        self,
        config: chain_mod.ChainConfig,
        limits: ControlLimits,
        horizon_steps: int,
        dt: float,
    ) -> None:
        self._config = config
        self._limits = limits
        self._horizon_steps = horizon_steps
        self._dt = dt

    def plan(self, context: PlanningContext) -> PlanResult:
        result = chain_mod.plan(
            context, self._config, self._horizon_steps, self._dt, self._limits
        )
        return PlanResult(
            trajectory=result.trajectory, trace_text=result.trace.narrative
        )


class IdmBaselinePlanner:
    """Longitudinal IDM rollout along the corridor at the current offset."""

    name = "idm_baseline"

    def __init__(self, params: IdmParams, horizon_steps: int, dt: float) -> None:
        self._params = params
        self._horizon_steps = horizon_steps
        self._dt = dt

    def plan(self, context: PlanningContext) -> PlanResult:
        corridor = context.map.corridor
        half_width = context.map.lane_half_width
        s0, d0 = corridor.project(context.ego.pose.x, context.ego.pose.y)
        v0 = (
            self._params.desired_speed
            if self._params.desired_speed is not None
            else context.map.speed_limit
        )

        # Arclength series per observed agent, indexed like the plan steps.
        others: list[tuple[np.ndarray, np.ndarray, float, float]] = []
        for obs in context.observations:
            xy = obs.predicted.xy_array()
            s_series, d_series = corridor.project_points(xy)
            others.append((s_series, d_series, obs.velocity, obs.length))

        fine = 5
        dt_f = self._dt / fine
        s, v = s0, context.ego.velocity
        svals = [s]
        for k in range(self._horizon_steps):
            lead_s = math.inf
            lead_v = 0.0
            lead_half = 0.0
            for s_series, d_series, ov, olen in others:
                j = min(k, len(s_series) - 1)
                if abs(d_series[j]) <= half_width and s < s_series[j] < lead_s:
                    lead_s, lead_v, lead_half = float(s_series[j]), ov, olen / 2.0
            for _ in range(fine):
                if math.isinf(lead_s):
                    a = idm_acceleration(v, 0.0, math.inf, v0, self._params)
                else:
                    gap = (lead_s - lead_half) - (s + context.ego.length / 2.0)
                    a = idm_acceleration(v, lead_v, max(gap, 1e-3), v0, self._params)
                v = max(0.0, v + a * dt_f)
                s = min(s + v * dt_f, corridor.length)
            svals.append(s)
        poses = tuple(Pose(*corridor.pose_at(si, d0)) for si in svals)
        return PlanResult(
            trajectory=Trajectory(poses=poses, dt=self._dt, start_time=context.timestamp)
        )


@dataclass
class RemotePlanner:
    """Asks a remote endpoint for each plan; failures surface as PlannerError."""

    endpoint: Endpoint
    sampling: SamplingParams
    horizon_steps: int
    dt: float
    timeout: float = 10.0
    name: str = field(default="remote", init=False)

    def plan(self, context: PlanningContext) -> PlanResult:
        result = remote_plan(
            self.endpoint, context, self.horizon_steps, self.dt, self.sampling, self.timeout
        )
        if isinstance(result, PlanFailure):
            raise PlannerError(result.reason.value, result.detail)
        return PlanResult(trajectory=result.trajectory, trace_text=result.trace_text)

    def close(self) -> None:
        self.endpoint.close()


PLANNER_NAMES = ("log_replay", "chain", "idm_baseline", "remote")
