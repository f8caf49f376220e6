#!/usr/bin/env python3
"""Generate the bundled scenario fixtures under scenarios/.

Each fixture is a small hand-designed traffic situation with a kinematically
consistent expert log on the 0.5 s grid. The set covers the behaviors the
test suite exercises end to end: free-road cruising near the limit, red and
green lights at the same stop line, gentle curve tracking, car following, a
crossing pedestrian, and an agent-count stress case.

Regenerate with:  python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from planloop.geometry import Corridor  # noqa: E402
from planloop.scenario import parse_scenario  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "scenarios"
DT = 0.5


def rnd(v: float) -> float:
    return round(float(v), 6)


def ego_entry(t: float, x: float, y: float, yaw: float, v: float, a: float) -> dict:
    return {"t": rnd(t), "x": rnd(x), "y": rnd(y), "yaw": rnd(yaw), "v": rnd(v), "a": rnd(a)}


def agent_entry(t: float, x: float, y: float, yaw: float, v: float) -> dict:
    return {"t": rnd(t), "x": rnd(x), "y": rnd(y), "yaw": rnd(yaw), "v": rnd(v)}


def finite_diff_accels(speeds: list[float]) -> list[float]:
    out = [(speeds[k + 1] - speeds[k]) / DT for k in range(len(speeds) - 1)]
    out.append(0.0)
    return out


def straight_ego_log(speeds: list[float]) -> list[dict]:
    """Integrate a speed series along y=0 starting at x=0."""
    accels = finite_diff_accels(speeds)
    rows = []
    x = 0.0
    for k, (v, a) in enumerate(zip(speeds, accels)):
        rows.append(ego_entry(k * DT, x, 0.0, 0.0, v, a))
        x += v * DT
    return rows


def speeds_cruise_brake(v0: float, brake_t: float, rate: float, n: int) -> list[float]:
    """Cruise at v0, then brake at the given rate to a standstill."""
    out = []
    for k in range(n):
        t = k * DT
        v = v0 if t <= brake_t else max(0.0, v0 - rate * (t - brake_t))
        out.append(v)
    return out


def write(name: str, data: dict) -> None:
    parse_scenario(data, source=name)  # fail fast on schema slips
    path = OUT_DIR / f"{name}.json"
    with path.open("w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
    print(f"wrote {path}")


def base(name: str, centerline: list[list[float]], limit: float, light: str,
         stop_line_s: float | None, ego_log: list[dict],
         agents: list[dict] | None = None, goal: str = "follow_lane") -> dict:
    mp: dict = {
        "centerline": centerline,
        "lane_half_width_m": 2.0,
        "speed_limit_mps": limit,
        "traffic_light": light,
    }
    if stop_line_s is not None:
        mp["stop_line_s"] = stop_line_s
    return {
        "id": name,
        "map": mp,
        "ego_log": ego_log,
        "agents": agents or [],
        "instruction": {"goal": goal},
    }


def straight_free() -> dict:
    # Low limit so the closed-loop plateau band (within 5% under the limit)
    # sits inside +/-0.2 of it. Expert ramps 2 -> 4 at 0.25 m/s^2.
    n = 45  # 22 s
    speeds = [min(2.0 + 0.25 * k * DT, 4.0) for k in range(n)]
    return base("straight_free", [[-10.0, 0.0], [200.0, 0.0]], 4.0, "none",
                None, straight_ego_log(speeds))


def red_light() -> dict:
    # Stop line at s=70 (x=60). The expert brakes at 2 m/s^2 so its front
    # bumper rests about a meter short of the line.
    n = 41  # 20 s
    v0, rate, half_len = 8.0, 2.0, 2.3
    stop_x = 60.0 - 1.0 - half_len
    brake_dist = v0 * v0 / (2.0 * rate)
    brake_t = (stop_x - brake_dist) / v0
    speeds = speeds_cruise_brake(v0, brake_t, rate, n)
    return base("red_light", [[-10.0, 0.0], [250.0, 0.0]], 10.0, "red",
                70.0, straight_ego_log(speeds))


def green_light() -> dict:
    # Same road and stop line as red_light, but the light is green and the
    # expert cruises straight through.
    n = 41
    speeds = [8.0] * n
    return base("green_light", [[-10.0, 0.0], [250.0, 0.0]], 10.0, "green",
                70.0, straight_ego_log(speeds))


def curve_left() -> dict:
    # 30 m straight lead-in, a left arc of radius 40 m spanning 75 degrees,
    # then a straight run-out. Expert holds 5 m/s along the arclength.
    pts: list[list[float]] = []
    s = -10.0
    while s < 30.0:
        pts.append([s, 0.0])
        s += 1.0
    radius, sweep = 40.0, math.radians(75.0)
    arc_len = radius * sweep
    k = 1
    while k * 1.0 <= arc_len:
        th = k * 1.0 / radius
        pts.append([30.0 + radius * math.sin(th), radius * (1.0 - math.cos(th))])
        k += 1
    end_th = sweep
    ex = 30.0 + radius * math.sin(end_th)
    ey = radius * (1.0 - math.cos(end_th))
    for j in range(1, 61):
        pts.append([ex + j * 1.0 * math.cos(end_th), ey + j * 1.0 * math.sin(end_th)])
    pts = [[rnd(p[0]), rnd(p[1])] for p in pts]

    corridor = Corridor(tuple((p[0], p[1]) for p in pts))
    n = 49  # 24 s
    v = 5.0
    rows = []
    for k in range(n):
        t = k * DT
        s_t = 10.0 + v * t  # ego starts at x=0, i.e. s=10
        x, y, yaw = corridor.pose_at(s_t)
        rows.append(ego_entry(t, x, y, yaw, v, 0.0))
    return base("curve_left", pts, 6.0, "none", None, rows)


def lead_vehicle() -> dict:
    # A slower lead starts 25 m ahead; the expert closes in, then matches
    # its speed at a comfortable gap.
    n = 41
    lead_log = [agent_entry(k * DT, 25.0 + 5.0 * k * DT, 0.0, 0.0, 5.0)
                for k in range(n)]
    rows = []
    x, v = 0.0, 8.0
    speeds = []
    xs = []
    for k in range(n):
        xs.append(x)
        speeds.append(v)
        gap = (25.0 + 5.0 * k * DT) - x
        if gap < 14.0 and v > 5.0:
            v = max(5.0, v - 1.5 * DT)
        x += v * DT
    accels = finite_diff_accels(speeds)
    for k in range(n):
        rows.append(ego_entry(k * DT, xs[k], 0.0, 0.0, speeds[k], accels[k]))
    agents = [{"id": "lead", "category": "vehicle", "length_m": 4.2,
               "width_m": 1.8, "log": lead_log}]
    return base("lead_vehicle", [[-10.0, 0.0], [300.0, 0.0]], 10.0, "none",
                None, rows, agents)


def crossing_pedestrian() -> dict:
    # A pedestrian waits at the right curb near x=40, then crosses at
    # 1.25 m/s starting t=4 s. The expert passes before the walker reaches
    # the lane.
    n = 41
    ped_log = []
    for k in range(n):
        t = k * DT
        y = min(-8.0 + 1.25 * max(0.0, t - 4.0), 8.0)
        walking = 4.0 < t and y < 8.0
        ped_log.append(agent_entry(t, 40.0, y, math.pi / 2.0,
                                   1.25 if walking else 0.0))
    speeds = [5.0] * n
    agents = [{"id": "walker", "category": "pedestrian", "length_m": 0.5,
               "width_m": 0.5, "log": ped_log}]
    return base("crossing_pedestrian", [[-10.0, 0.0], [250.0, 0.0]], 8.0,
                "none", None, straight_ego_log(speeds), agents)


def many_agents() -> dict:
    # Forty parked vehicles flank the corridor; exercises the observation
    # cap and keeps the drive itself trivial.
    n = 33  # 16 s
    agents = []
    for i in range(40):
        side = 6.0 if i % 2 == 0 else -6.0
        x0 = 10.0 + 2.5 * i
        log = [agent_entry(k * DT, x0, side, 0.0, 0.0) for k in range(n)]
        agents.append({"id": f"parked_{i:02d}", "category": "vehicle",
                       "length_m": 4.4, "width_m": 1.8, "log": log})
    speeds = [8.0] * n
    return base("many_agents", [[-10.0, 0.0], [250.0, 0.0]], 10.0, "none",
                None, straight_ego_log(speeds), agents)


def main() -> None:
    OUT_DIR.mkdir(exist_ok=True)
    for build in (straight_free, red_light, green_light, curve_left,
                  lead_vehicle, crossing_pedestrian, many_agents):
        data = build()
        write(data["id"], data)


if __name__ == "__main__":
    main()
