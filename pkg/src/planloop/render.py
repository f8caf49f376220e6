"""Figure rendering for run outputs.

One SVG per scenario, drawn with the object-oriented matplotlib API (no
pyplot, safe under worker threads). Key artists carry gid markers so tests
and downstream tooling can find them in the SVG: ``centerline``,
``corridor-edge-left``, ``corridor-edge-right``, ``stop-line``, ``ego-path``
(closed loop) or ``ego-truth``/``planned-frame-<i>`` (open loop), and
``agent-<id>``. Output bytes are deterministic: fixed hash salt, no embedded
creation date.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .scenario import Scenario
from .simulate import ClosedLoopLog, OpenLoopLog

_LIGHT_COLORS = {"red": "#c62828", "yellow": "#f9a825", "green": "#2e7d32", "none": "#607d8b"}


def _corridor_artists(ax, scenario: Scenario) -> None:
    corridor = scenario.map.corridor
    s = np.linspace(0.0, corridor.length, max(2, int(corridor.length / 2.0) + 1))
    center = corridor.point_at(s)
    normal = corridor.normal_at(s)
    hw = scenario.map.lane_half_width
    left = center + hw * normal
    right = center - hw * normal
    ax.plot(center[:, 0], center[:, 1], color="#9e9e9e", lw=0.8, ls="--", gid="centerline")
    ax.plot(left[:, 0], left[:, 1], color="#424242", lw=1.0, gid="corridor-edge-left")
    ax.plot(right[:, 0], right[:, 1], color="#424242", lw=1.0, gid="corridor-edge-right")
    if scenario.map.stop_line_s is not None:
        p = corridor.point_at(scenario.map.stop_line_s)
        n = corridor.normal_at(scenario.map.stop_line_s)
        seg = np.array([p - hw * n, p + hw * n])
        color = _LIGHT_COLORS[scenario.map.traffic_light.value]
        ax.plot(seg[:, 0], seg[:, 1], color=color, lw=2.0, gid="stop-line")


def _new_figure() -> tuple[Figure, FigureCanvasSVG]:
    fig = Figure(figsize=(7.0, 5.5), dpi=100)
    FigureCanvasSVG(fig)
    return fig, fig.canvas


def _save(fig: Figure, path: Path) -> None:
    with matplotlib.rc_context({"svg.hashsalt": "planloop"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def render_open_loop(log: OpenLoopLog, scenario: Scenario, path: str | Path) -> None:
    """Truth path with a sparse overlay of planned trajectories."""
    fig, _ = _new_figure()
    ax = fig.add_subplot(111)
    _corridor_artists(ax, scenario)
    truth_xy = scenario.ego.motion.xy_array()
    ax.plot(truth_xy[:, 0], truth_xy[:, 1], color="#1565c0", lw=1.6, gid="ego-truth")
    stride = max(1, len(log.frames) // 8)
    for i, frame in enumerate(log.frames):
        if i % stride or frame.planned is None:
            continue
        xy = frame.planned.xy_array()
        ax.plot(xy[:, 0], xy[:, 1], color="#ef6c00", lw=0.9, alpha=0.75, gid=f"planned-frame-{i}")
    for track in scenario.agents:
        xy = track.motion.xy_array()
        ax.plot(xy[:, 0], xy[:, 1], color="#6a1b9a", lw=0.8, alpha=0.6, gid=f"agent-{track.agent_id}")
    ax.set_aspect("equal")
    ax.set_title(f"{scenario.scenario_id} open loop ({log.planner})")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    _save(fig, Path(path))


def render_closed_loop(log: ClosedLoopLog, scenario: Scenario, path: str | Path) -> None:
    """Driven path and speed profile of a closed-loop rollout."""
    fig, _ = _new_figure()
    ax = fig.add_subplot(211)
    _corridor_artists(ax, scenario)
    xs = [tk.x for tk in log.ticks]
    ys = [tk.y for tk in log.ticks]
    ax.plot(xs, ys, color="#1565c0", lw=1.6, gid="ego-path")
    agent_series: dict[str, list[tuple[float, float]]] = {}
    for tk in log.ticks:
        for a in tk.agents:
            agent_series.setdefault(a.agent_id, []).append((a.x, a.y))
    for agent_id, pts in agent_series.items():
        arr = np.array(pts)
        ax.plot(arr[:, 0], arr[:, 1], color="#6a1b9a", lw=0.8, alpha=0.6, gid=f"agent-{agent_id}")
    ax.set_aspect("equal")
    ax.set_title(f"{scenario.scenario_id} {log.mode.value} ({log.planner})")
    ax.set_ylabel("y [m]")

    ax2 = fig.add_subplot(212)
    ts = [tk.t for tk in log.ticks]
    vs = [tk.v for tk in log.ticks]
    ax2.plot(ts, vs, color="#1565c0", lw=1.2, gid="ego-speed")
    ax2.axhline(scenario.map.speed_limit, color="#c62828", lw=0.8, ls=":", gid="speed-limit")
    ax2.set_xlabel("t [s]")
    ax2.set_ylabel("v [m/s]")
    _save(fig, Path(path))


def render_log(log: OpenLoopLog | ClosedLoopLog, scenario: Scenario, path: str | Path) -> None:
    if isinstance(log, OpenLoopLog):
        render_open_loop(log, scenario, path)
    else:
        render_closed_loop(log, scenario, path)
