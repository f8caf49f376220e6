"""Background traffic along the corridor.

Vehicles in reactive mode follow the intelligent-driver model (IDM)
longitudinally at their logged lateral offset:

    a = a_max * (1 - (v/v0)^delta - (s*/gap)^2)
    s* = s0 + max(0, v*T + v*(v - v_lead) / (2*sqrt(a_max*b)))

Pedestrians and cyclists always replay their logs, as does any vehicle that
has left the corridor. Updates are Jacobi style: every agent advances from
the same snapshot, so the result does not depend on agent order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .dynamics import VehicleState
from .scenario import AgentCategory, AgentTrack, MapContext


class AgentMode(str, enum.Enum):
    LOG_REPLAY = "log_replay"
    REACTIVE_IDM = "reactive_idm"


@dataclass(frozen=True)
class IdmParams:
    """IDM parameters; ``desired_speed`` of None means the map speed limit."""

    desired_speed: float | None = None
    time_headway: float = 1.5
    min_gap: float = 2.0
    max_accel: float = 1.4
    comfort_decel: float = 2.0
    exponent: float = 4.0
    hard_decel: float = 8.0


@dataclass(frozen=True)
class SimAgent:
    """Simulated background-agent state at one tick."""

    agent_id: str
    category: AgentCategory
    length: float
    width: float
    x: float
    y: float
    yaw: float
    v: float
    mode: AgentMode


def idm_acceleration(v: float, v_lead: float, gap: float, v0: float, params: IdmParams) -> float:
    """IDM longitudinal acceleration for a follower at speed v.

    ``gap`` is the bumper-to-bumper distance to the leader (math.inf for a
    free road, in which case v_lead is ignored). Clamped below at the hard
    braking limit.
    """
    if gap <= 0.0:
        raise ValueError("gap must be positive")
    if v0 <= 0.0:
        raise ValueError("desired speed must be positive")
    s_star = params.min_gap + max(
        0.0,
        v * params.time_headway
        + v * (v - v_lead) / (2.0 * math.sqrt(params.max_accel * params.comfort_decel)),
    )
    accel = params.max_accel * (1.0 - (v / v0) ** params.exponent - (s_star / gap) ** 2)
    return max(accel, -params.hard_decel)


def _replay(agent: SimAgent, track: AgentTrack, t_next: float) -> SimAgent:
    pose = track.motion.sample(t_next)
    return replace(agent, x=pose.x, y=pose.y, yaw=pose.yaw, v=track.speed_at(t_next))


def step_background(
    agents: Sequence[SimAgent],
    ego: VehicleState,
    ego_length: float,
    map_ctx: MapContext,
    tracks: Mapping[str, AgentTrack],
    t: float,
    dt: float,
    params: IdmParams,
) -> tuple[SimAgent, ...]:
    """Advance all background agents from time t to t + dt.

    Log-replay agents sample their logs (exact at log knots). Reactive
    vehicles pick the nearest entity ahead in the corridor (other agents or
    the ego) as their leader and integrate IDM along the corridor at their
    current lateral offset.
    """
    corridor = map_ctx.corridor
    half_width = map_ctx.lane_half_width
    v0 = params.desired_speed if params.desired_speed is not None else map_ctx.speed_limit

    # Snapshot corridor coordinates of everything once, before any update.
    coords: dict[str, tuple[float, float]] = {}
    for agent in agents:
        s, d = corridor.project(agent.x, agent.y)
        coords[agent.agent_id] = (s, d)
    ego_s, ego_d = corridor.project(ego.x, ego.y)

    out = []
    for agent in agents:
        track = tracks[agent.agent_id]
        if agent.mode is AgentMode.LOG_REPLAY or agent.category is not AgentCategory.VEHICLE:
            out.append(_replay(agent, track, t + dt))
            continue
        s, d = coords[agent.agent_id]
        if abs(d) > half_width:
            out.append(_replay(agent, track, t + dt))
            continue

        lead_s = math.inf
        lead_v = 0.0
        lead_half = 0.0
        for other in agents:
            if other.agent_id == agent.agent_id:
                continue
            os, od = coords[other.agent_id]
            if abs(od) <= half_width and s < os < lead_s:
                lead_s, lead_v, lead_half = os, other.v, other.length / 2.0
        if abs(ego_d) <= half_width and s < ego_s < lead_s:
            lead_s, lead_v, lead_half = ego_s, ego.v, ego_length / 2.0

        if math.isinf(lead_s):
            accel = idm_acceleration(agent.v, 0.0, math.inf, v0, params)
        else:
            gap = (lead_s - lead_half) - (s + agent.length / 2.0)
            accel = idm_acceleration(agent.v, lead_v, max(gap, 1e-3), v0, params)

        s_next = min(s + agent.v * dt, corridor.length)
        v_next = max(0.0, agent.v + accel * dt)
        x, y, yaw = corridor.pose_at(s_next, d)
        out.append(replace(agent, x=x, y=y, yaw=yaw, v=v_next))
    return tuple(out)
