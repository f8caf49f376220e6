"""Planar geometry primitives shared by the planner, simulator, and metrics.

Everything here is plain numpy. Oriented rectangles are represented by their
four corners, shape (..., 4, 2), so the distance/overlap routines broadcast
over leading batch dimensions (e.g. one ego footprint per rollout step).
"""

from __future__ import annotations

import math

import numpy as np

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to the half-open interval (-pi, pi]."""
    wrapped = math.remainder(theta, _TWO_PI)
    if wrapped <= -math.pi:
        wrapped += _TWO_PI
    return wrapped


def wrap_angle_array(theta: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap_angle`."""
    wrapped = np.remainder(np.asarray(theta, dtype=float) + math.pi, _TWO_PI) - math.pi
    # remainder() puts -pi at the low end; flip it to +pi to match wrap_angle.
    return np.where(wrapped <= -math.pi, wrapped + _TWO_PI, wrapped)


def angle_diff(a: float, b: float) -> float:
    """Shortest signed angular difference a - b, wrapped to (-pi, pi]."""
    return wrap_angle(a - b)


def rectangle_corners(
    x: float | np.ndarray,
    y: float | np.ndarray,
    yaw: float | np.ndarray,
    length: float,
    width: float,
) -> np.ndarray:
    """Corners of an oriented rectangle centered at (x, y).

    Length runs along the heading, width across it. Scalar inputs give a
    (4, 2) array; array inputs of shape (N,) give (N, 4, 2). Corner order is
    front-left, front-right, rear-right, rear-left.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    yaw = np.asarray(yaw, dtype=float)
    hl = 0.5 * length
    hw = 0.5 * width
    local = np.array(
        [[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]], dtype=float
    )
    c = np.cos(yaw)[..., None]
    s = np.sin(yaw)[..., None]
    cx = x[..., None] + local[:, 0] * c - local[:, 1] * s
    cy = y[..., None] + local[:, 0] * s + local[:, 1] * c
    return np.stack([cx, cy], axis=-1)


def _project_extents(corners: np.ndarray, axes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # corners (..., 4, 2), axes (..., K, 2) -> per-axis min/max of the dot products
    dots = np.einsum("...ci,...ki->...kc", corners, axes)
    return dots.min(axis=-1), dots.max(axis=-1)


def _edge_axes(corners: np.ndarray) -> np.ndarray:
    # Two unique edge normals per rectangle (the other two are parallel).
    e0 = corners[..., 1, :] - corners[..., 0, :]
    e1 = corners[..., 2, :] - corners[..., 1, :]
    edges = np.stack([e0, e1], axis=-2)
    normals = np.stack([-edges[..., 1], edges[..., 0]], axis=-1)
    return normals


def rectangles_overlap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Separating-axis overlap test for oriented rectangles.

    Touching boundaries count as overlapping (distance zero). Returns a
    boolean array over the broadcast leading dimensions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    axes = np.concatenate([_edge_axes(a), _edge_axes(b)], axis=-2)
    amin, amax = _project_extents(a, axes)
    bmin, bmax = _project_extents(b, axes)
    separated = np.logical_or(bmin > amax, amin > bmax).any(axis=-1)
    return np.logical_not(separated)


def _segment_distance(
    p1: np.ndarray, p2: np.ndarray, q1: np.ndarray, q2: np.ndarray
) -> np.ndarray:
    """Minimum distance between segments p1-p2 and q1-q2, batched on (..., 2)."""
    d1 = p2 - p1
    d2 = q2 - q1
    r = p1 - q1
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    b = np.einsum("...i,...i->...", d1, d2)
    c = np.einsum("...i,...i->...", d1, r)
    f = np.einsum("...i,...i->...", d2, r)
    denom = a * e - b * b
    safe_denom = np.where(denom > 0.0, denom, 1.0)
    s = np.clip(np.where(denom > 0.0, (b * f - c * e) / safe_denom, 0.0), 0.0, 1.0)
    safe_e = np.where(e > 0.0, e, 1.0)
    t = (b * s + f) / safe_e
    t_clamped = np.clip(t, 0.0, 1.0)
    safe_a = np.where(a > 0.0, a, 1.0)
    s = np.where(t != t_clamped, np.clip((b * t_clamped - c) / safe_a, 0.0, 1.0), s)
    t = t_clamped
    diff = (p1 + s[..., None] * d1) - (q1 + t[..., None] * d2)
    return np.hypot(diff[..., 0], diff[..., 1])


def rectangle_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact minimum distance between oriented rectangles (0 when overlapping).

    Args:
        a: corners, shape (..., 4, 2).
        b: corners, shape (..., 4, 2), broadcastable against ``a``.

    Returns:
        Distances over the broadcast leading dimensions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    overlap = rectangles_overlap(a, b)
    nxt = np.roll(np.arange(4), -1)
    best = None
    for i in range(4):
        for j in range(4):
            d = _segment_distance(
                a[..., i, :], a[..., nxt[i], :], b[..., j, :], b[..., nxt[j], :]
            )
            best = d if best is None else np.minimum(best, d)
    return np.where(overlap, 0.0, best)


def polyline_arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative arclength of a polyline, starting at 0."""
    points = np.asarray(points, dtype=float)
    seg = np.hypot(np.diff(points[:, 0]), np.diff(points[:, 1]))
    return np.concatenate([[0.0], np.cumsum(seg)])


class Corridor:
    """Arclength parameterization of a lane centerline polyline.

    Provides point/tangent lookup at arclength s, signed projection of points
    onto the path (s along, d to the left), and a finite-difference curvature
    estimate. s is clamped to [0, length] everywhere.
    """

    def __init__(self, points: np.ndarray) -> None:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] != 2:
            raise ValueError("corridor needs at least two 2-d points")
        seg = np.diff(points, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise ValueError("corridor has consecutive duplicate points")
        self.points = points
        self._seg = seg
        self._seg_len = seg_len
        self._cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self._angles = np.arctan2(seg[:, 1], seg[:, 0])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def _locate(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._seg) - 1)
        frac = (s - self._cum[idx]) / self._seg_len[idx]
        return idx, np.clip(frac, 0.0, 1.0)

    def point_at(self, s: float | np.ndarray) -> np.ndarray:
        """Point on the centerline at arclength s; (2,) or (N, 2)."""
        idx, frac = self._locate(s)
        return self.points[idx] + frac[..., None] * self._seg[idx]

    def tangent_at(self, s: float | np.ndarray) -> np.ndarray:
        """Tangent heading (radians) at arclength s, piecewise constant."""
        idx, _ = self._locate(s)
        return self._angles[idx]

    def normal_at(self, s: float | np.ndarray) -> np.ndarray:
        """Left unit normal at arclength s."""
        ang = self.tangent_at(s)
        return np.stack([-np.sin(ang), np.cos(ang)], axis=-1)

    def pose_at(self, s: float, offset: float = 0.0) -> tuple[float, float, float]:
        """(x, y, yaw) at arclength s, shifted ``offset`` meters to the left."""
        p = self.point_at(s) + offset * self.normal_at(s)
        return float(p[0]), float(p[1]), float(self.tangent_at(s))

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Project one point; returns (s, signed lateral offset, left +)."""
        s, d = self.project_points(np.array([[x, y]]))
        return float(s[0]), float(d[0])

    def project_points(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project points (M, 2) onto the path.

        Each point maps to its closest path location; ties resolve to the
        lowest arclength. Returns (s (M,), d (M,)).
        """
        pts = np.asarray(pts, dtype=float)
        rel = pts[:, None, :] - self.points[None, :-1, :]
        t = np.einsum("mki,ki->mk", rel, self._seg) / (self._seg_len**2)
        t = np.clip(t, 0.0, 1.0)
        foot = self.points[None, :-1, :] + t[..., None] * self._seg[None, :, :]
        delta = pts[:, None, :] - foot
        dist2 = np.einsum("mki,mki->mk", delta, delta)
        k = np.argmin(dist2, axis=1)
        rows = np.arange(len(pts))
        s = self._cum[k] + t[rows, k] * self._seg_len[k]
        nx = -self._seg[k, 1] / self._seg_len[k]
        ny = self._seg[k, 0] / self._seg_len[k]
        d = delta[rows, k, 0] * nx + delta[rows, k, 1] * ny
        return s, d

    def curvature_at(self, s: float, window: float = 1.0) -> float:
        """Signed curvature from a tangent finite difference across ``window``."""
        lo = max(0.0, s - window)
        hi = min(self.length, s + window)
        if hi - lo <= 1e-9:
            return 0.0
        dth = angle_diff(float(self.tangent_at(hi)), float(self.tangent_at(lo)))
        return dth / (hi - lo)
