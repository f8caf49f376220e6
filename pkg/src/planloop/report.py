"""Run reports: one JSON document plus a CSV with one row per scenario.

Everything is emitted with sorted keys and scenario rows sorted by id, so a
repeat run with the same config and seed produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .metrics import ClosedLoopResult, OpenLoopResult
from .simulate import SimMode

OPEN_COLUMNS = (
    "scenario",
    "frames",
    "missed",
    "planner_failures",
    "ade",
    "fde",
    "ahe",
    "fhe",
    "miss_rate",
    "score",
)
CLOSED_COLUMNS = (
    "scenario",
    "ticks",
    "planner_failures",
    "collision_free",
    "drivable_compliance",
    "progress_ratio",
    "comfort",
    "score",
)


def scenario_row(scenario_id: str, result: OpenLoopResult | ClosedLoopResult) -> dict:
    if isinstance(result, OpenLoopResult):
        return {
            "scenario": scenario_id,
            "frames": result.frames,
            "missed": result.missed,
            "planner_failures": result.planner_failures,
            "ade": result.ade,
            "fde": result.fde,
            "ahe": result.ahe,
            "fhe": result.fhe,
            "miss_rate": result.miss_rate,
            "score": result.score,
        }
    return {
        "scenario": scenario_id,
        "ticks": result.ticks,
        "planner_failures": result.planner_failures,
        "collision_free": result.collision_free,
        "drivable_compliance": result.drivable_compliance,
        "progress_ratio": result.progress_ratio,
        "comfort": result.comfort,
        "score": result.score,
    }


def aggregate_rows(rows: Sequence[dict]) -> dict:
    """Mean score (and miss rate when present) across scenario rows."""
    agg: dict = {"scenario_count": len(rows)}
    if not rows:
        agg["score"] = 0.0
        return agg
    agg["score"] = sum(r["score"] for r in rows) / len(rows)
    if "miss_rate" in rows[0]:
        agg["miss_rate"] = sum(r["miss_rate"] for r in rows) / len(rows)
    if "collision_free" in rows[0]:
        agg["collision_free_fraction"] = sum(
            1.0 for r in rows if r["collision_free"]
        ) / len(rows)
    agg["planner_failures"] = sum(r["planner_failures"] for r in rows)
    return agg


def build_report(
    rows: Sequence[dict],
    skipped: Sequence[dict],
    planner: str,
    mode: SimMode,
    seed: int,
) -> dict:
    return {
        "planner": planner,
        "mode": mode.value,
        "seed": seed,
        "aggregate": aggregate_rows(rows),
        "scenarios": sorted(rows, key=lambda r: r["scenario"]),
        "skipped": sorted(skipped, key=lambda r: r["scenario"]),
    }


def write_report_json(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")


def write_report_csv(report: dict, path: str | Path) -> None:
    columns = OPEN_COLUMNS if report["mode"] == SimMode.OPEN_LOOP.value else CLOSED_COLUMNS
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in report["scenarios"]:
            writer.writerow(row)
