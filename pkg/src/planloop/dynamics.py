"""Kinematic bicycle model and finite-horizon LQR trajectory tracking.

The tracker runs on a 3-state error model around the reference trajectory:

    e = [lateral offset, heading error, speed error]
    u = [steering deviation, acceleration deviation]

linearized at a nominal speed v and wheelbase L with timestep dt:

    A = [[1, v*dt, 0], [0, 1, 0], [0, 0, 1]]
    B = [[0, 0], [v*dt/L, 0], [0, dt]]

Gains come from the standard backward Riccati recursion with terminal cost
equal to the stage cost. Commands are feedforward (reference acceleration and
curvature steering) minus K @ e, clamped to the control limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import angle_diff, wrap_angle
from .scenario import Trajectory

_MIN_SEGMENT = 1e-3


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    yaw: float
    v: float


@dataclass(frozen=True)
class ControlLimits:
    accel_min: float = -4.0
    accel_max: float = 3.0
    steer_max: float = 0.6


@dataclass(frozen=True)
class VehicleParams:
    """Ego geometry and actuation bounds."""

    length: float = 4.6
    width: float = 1.85
    wheelbase: float = 2.7
    accel_min: float = -4.0
    accel_max: float = 3.0
    steer_max: float = 0.6

    @property
    def limits(self) -> ControlLimits:
        return ControlLimits(
            accel_min=self.accel_min, accel_max=self.accel_max, steer_max=self.steer_max
        )


@dataclass(frozen=True)
class Control:
    acceleration: float
    steering_angle: float

    @classmethod
    def clamped(cls, acceleration: float, steering_angle: float, limits: ControlLimits) -> "Control":
        # float() here keeps numpy scalars out of downstream state and logs.
        return cls(
            acceleration=float(min(max(acceleration, limits.accel_min), limits.accel_max)),
            steering_angle=float(min(max(steering_angle, -limits.steer_max), limits.steer_max)),
        )


def kinematic_step(state: VehicleState, control: Control, wheelbase: float, dt: float) -> VehicleState:
    """One forward-Euler step of the kinematic bicycle model.

    Speed never goes negative (braking saturates at standstill); yaw stays
    normalized.
    """
    x = state.x + state.v * math.cos(state.yaw) * dt
    y = state.y + state.v * math.sin(state.yaw) * dt
    yaw = wrap_angle(state.yaw + state.v / wheelbase * math.tan(control.steering_angle) * dt)
    v = max(0.0, state.v + control.acceleration * dt)
    return VehicleState(x=x, y=y, yaw=yaw, v=v)


@dataclass(frozen=True)
class LqrConfig:
    q_lateral: float = 0.8
    q_heading: float = 3.0
    q_velocity: float = 1.2
    r_steer: float = 6.0
    r_accel: float = 1.0
    horizon_steps: int = 40
    dt: float = 0.1
    nominal_speed: float = 5.0
    wheelbase: float = 2.7


@dataclass(frozen=True)
class LqrGains:
    """Time-varying gain schedule K_t, indexed at ``dt`` from the plan start."""

    ks: np.ndarray  # (horizon, 2, 3)
    dt: float

    def at(self, step: int) -> np.ndarray:
        return self.ks[min(max(step, 0), len(self.ks) - 1)]


def riccati_recursion(
    a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray, horizon: int
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backward Riccati recursion for the finite-horizon discrete LQR.

    Terminal cost P_N = Q. Returns (gains [K_0..K_{N-1}], costs [P_0..P_N]).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    p = q.copy()
    ps = [p]
    ks: list[np.ndarray] = []
    for _ in range(horizon):
        btp = b.T @ p
        k = np.linalg.solve(r + btp @ b, btp @ a)
        p = q + a.T @ p @ (a - b @ k)
        p = 0.5 * (p + p.T)
        ks.append(k)
        ps.append(p)
    ks.reverse()
    ps.reverse()
    return ks, ps


def error_model(nominal_speed: float, wheelbase: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) of the discrete error model at the given nominal speed."""
    a = np.array([[1.0, nominal_speed * dt, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    b = np.array([[0.0, 0.0], [nominal_speed * dt / wheelbase, 0.0], [0.0, dt]])
    return a, b


def solve_lqr_gains(config: LqrConfig) -> LqrGains:
    """Gain schedule for the tracking error model under ``config``."""
    a, b = error_model(config.nominal_speed, config.wheelbase, config.dt)
    q = np.diag([config.q_lateral, config.q_heading, config.q_velocity])
    r = np.diag([config.r_steer, config.r_accel])
    ks, _ = riccati_recursion(a, b, q, r, config.horizon_steps)
    return LqrGains(ks=np.array(ks), dt=config.dt)


def _reference_speeds(reference: Trajectory) -> list[float]:
    n = len(reference.poses)
    if n == 1:
        return [0.0]
    speeds = []
    for i in range(n - 1):
        p, q = reference.poses[i], reference.poses[i + 1]
        speeds.append(math.hypot(q.x - p.x, q.y - p.y) / reference.dt)
    speeds.append(speeds[-1])
    return speeds


def track_trajectory(
    state: VehicleState,
    reference: Trajectory,
    gains: LqrGains,
    t: float,
    limits: ControlLimits,
    wheelbase: float,
) -> Control:
    """LQR tracking command for the reference at time ``t``.

    Uses the nearest-in-time reference pose and finite-differenced reference
    speeds; feedforward covers the reference acceleration and path curvature.
    """
    n = len(reference.poses)
    idx = int(round((t - reference.start_time) / reference.dt))
    idx = min(max(idx, 0), n - 1)
    ref = reference.poses[idx]
    speeds = _reference_speeds(reference)

    accel_ff = 0.0
    steer_ff = 0.0
    if idx < n - 1:
        accel_ff = (speeds[idx + 1] - speeds[idx]) / reference.dt
        nxt = reference.poses[idx + 1]
        ds = math.hypot(nxt.x - ref.x, nxt.y - ref.y)
        if ds > _MIN_SEGMENT:
            steer_ff = math.atan(wheelbase * angle_diff(nxt.yaw, ref.yaw) / ds)

    cos_r = math.cos(ref.yaw)
    sin_r = math.sin(ref.yaw)
    dx = state.x - ref.x
    dy = state.y - ref.y
    error = np.array(
        [
            -sin_r * dx + cos_r * dy,
            angle_diff(state.yaw, ref.yaw),
            state.v - speeds[idx],
        ]
    )
    step = int(round((t - reference.start_time) / gains.dt))
    u = -gains.at(step) @ error
    return Control.clamped(accel_ff + u[1], steer_ff + u[0], limits)
