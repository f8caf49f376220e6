"""Command-line harness.

    harness run      --scenarios DIR --planner NAME --mode MODE --out DIR
    harness render   --run DIR --scenarios DIR [--out DIR]
    harness validate --scenarios DIR

Exit codes: 0 success, 1 usage, 2 data problems (bad scenarios, empty
directory, bad config), 3 internal errors. ``run`` writes report.json,
report.csv, one <scenario>.log.jsonl, and one <scenario>.svg per scenario.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, HarnessConfig, Settings, load_settings
from .language import SamplingParams, open_endpoint
from .metrics import closed_loop_score, open_loop_score
from .planners import (
    PLANNER_NAMES,
    ChainPlanner,
    IdmBaselinePlanner,
    LogReplayPlanner,
    RemotePlanner,
)
from .render import render_log
from .report import build_report, scenario_row, write_report_csv, write_report_json
from .scenario import Scenario, ScenarioError, load_scenario
from .simulate import SimMode, run_closed_loop, run_open_loop, write_log_jsonl

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

log = logging.getLogger(__name__)


class DataError(RuntimeError):
    """Input data problems that should exit with code 2."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the harness reserves 2 for
    # data problems, so usage errors exit 1 instead.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_planner(name: str, scenario: Scenario, cfg: HarnessConfig, endpoint=None):
    settings = cfg.settings
    if name == "log_replay":
        return LogReplayPlanner(scenario)
    if name == "chain":
        return ChainPlanner(
            settings.chain, settings.vehicle.limits, scenario.plan_steps, scenario.resolution
        )
    if name == "idm_baseline":
        return IdmBaselinePlanner(settings.idm, scenario.plan_steps, scenario.resolution)
    if name == "remote":
        if endpoint is None:
            endpoint = open_endpoint(cfg.endpoint)
        sampling = SamplingParams(
            temperature=settings.remote.temperature,
            top_p=settings.remote.top_p,
            seed=cfg.seed,
            max_tokens=settings.remote.max_tokens,
        )
        return RemotePlanner(
            endpoint=endpoint,
            sampling=sampling,
            horizon_steps=scenario.plan_steps,
            dt=scenario.resolution,
            timeout=settings.remote.timeout,
        )
    raise DataError(f"unknown planner '{name}'")


def _run_one_file(path: Path, cfg: HarnessConfig, endpoint=None) -> tuple[str, dict]:
    """Run one scenario file; returns ('ok', row) or ('skip', info)."""
    try:
        scenario = load_scenario(path)
    except ScenarioError as exc:
        return "skip", {"scenario": path.name, "error": str(exc)}
    try:
        planner = _build_planner(cfg.planner, scenario, cfg, endpoint)
        settings = cfg.settings
        if cfg.mode is SimMode.OPEN_LOOP:
            sim_log = run_open_loop(scenario, planner, settings.vehicle, settings.agent_cap)
            result = open_loop_score(sim_log.frames, settings.metrics)
        else:
            sim_cfg = replace(settings.sim, mode=cfg.mode)
            sim_log = run_closed_loop(
                scenario,
                planner,
                sim_cfg,
                settings.vehicle,
                settings.lqr,
                settings.idm,
                settings.agent_cap,
            )
            result = closed_loop_score(sim_log, scenario, settings.vehicle, settings.metrics)
        write_log_jsonl(sim_log, cfg.output_dir / f"{scenario.scenario_id}.log.jsonl")
        render_log(sim_log, scenario, cfg.output_dir / f"{scenario.scenario_id}.svg")
        return "ok", scenario_row(scenario.scenario_id, result)
    except Exception as exc:  # keep the batch alive; report the scenario as skipped
        log.warning("scenario %s failed: %s", path.name, exc)
        return "skip", {"scenario": path.name, "error": f"{type(exc).__name__}: {exc}"}


def _pool_entry(args: tuple[str, HarnessConfig]) -> tuple[str, dict]:
    path, cfg = args
    return _run_one_file(Path(path), cfg)


def run_benchmark(cfg: HarnessConfig) -> dict:
    """Run every scenario in the directory and write the report files."""
    files = sorted(cfg.scenario_dir.glob("*.json"))
    if not files:
        raise DataError(f"no scenarios found in {cfg.scenario_dir}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)

    jobs = cfg.jobs
    if cfg.planner == "remote" and jobs > 1:
        log.warning("remote planner holds one endpoint; forcing --jobs 1")
        jobs = 1

    rows: list[dict] = []
    skipped: list[dict] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_pool_entry, [(str(f), cfg) for f in files]))
    else:
        endpoint = None
        try:
            if cfg.planner == "remote":
                if not cfg.endpoint:
                    raise DataError("remote planner requires --endpoint")
                endpoint = open_endpoint(cfg.endpoint)
            outcomes = [_run_one_file(f, cfg, endpoint) for f in files]
        finally:
            if endpoint is not None:
                endpoint.close()
    for status, payload in outcomes:
        (rows if status == "ok" else skipped).append(payload)

    if not rows and skipped:
        raise DataError(
            "no scenario produced results; first error: "
            f"{skipped[0]['scenario']}: {skipped[0]['error']}"
        )
    report = build_report(rows, skipped, cfg.planner, cfg.mode, cfg.seed)
    write_report_json(report, cfg.output_dir / "report.json")
    write_report_csv(report, cfg.output_dir / "report.csv")
    return report


def render_run(run_dir: Path, scenario_dir: Path, out_dir: Path) -> int:
    """Re-render figures for every log in a run directory."""
    from .simulate import read_log_jsonl

    logs = sorted(run_dir.glob("*.log.jsonl"))
    if not logs:
        raise DataError(f"no logs found in {run_dir}")
    scenarios: dict[str, Scenario] = {}
    for f in sorted(scenario_dir.glob("*.json")):
        try:
            sc = load_scenario(f)
            scenarios[sc.scenario_id] = sc
        except ScenarioError as exc:
            log.warning("skipping scenario %s: %s", f.name, exc)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for log_path in logs:
        sim_log = read_log_jsonl(log_path)
        scenario = scenarios.get(sim_log.scenario_id)
        if scenario is None:
            raise DataError(f"{log_path.name}: no scenario named '{sim_log.scenario_id}'")
        render_log(sim_log, scenario, out_dir / f"{sim_log.scenario_id}.svg")
        count += 1
    return count


def validate_scenarios(scenario_dir: Path) -> list[tuple[str, str | None]]:
    """(file, error-or-None) for every scenario JSON in the directory."""
    files = sorted(scenario_dir.glob("*.json"))
    if not files:
        raise DataError(f"no scenarios found in {scenario_dir}")
    results: list[tuple[str, str | None]] = []
    for f in files:
        try:
            load_scenario(f)
            results.append((f.name, None))
        except ScenarioError as exc:
            results.append((f.name, str(exc)))
    return results


def _make_parser() -> _Parser:
    parser = _Parser(prog="harness", description="Motion-planning benchmark harness")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="run a benchmark over a scenario directory")
    run.add_argument("--scenarios", type=Path, help="directory of scenario JSON files")
    run.add_argument("--planner", choices=PLANNER_NAMES)
    run.add_argument("--mode", choices=[m.value for m in SimMode])
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--jobs", type=int, default=None, help="worker processes")
    run.add_argument("--endpoint", help="remote planner endpoint (URL or command)")
    run.add_argument("--config", type=Path, help="TOML config file")

    render = sub.add_parser("render", help="re-render figures from run logs")
    render.add_argument("--run", type=Path, required=True, help="run output directory")
    render.add_argument("--scenarios", type=Path, required=True)
    render.add_argument("--out", type=Path, help="figure directory (default: run dir)")

    validate = sub.add_parser("validate", help="validate scenario files")
    validate.add_argument("--scenarios", type=Path, required=True)
    return parser


def _resolve_run_config(args: argparse.Namespace, parser: _Parser) -> HarnessConfig:
    settings, file_run = load_settings(args.config)

    def pick(flag, key, fallback=None):
        if flag is not None:
            return flag
        return file_run.get(key, fallback)

    scenarios = pick(args.scenarios, "scenarios")
    out = pick(args.out, "out")
    planner = pick(args.planner, "planner")
    mode = pick(args.mode, "mode")
    for name, value in (("--scenarios", scenarios), ("--out", out), ("--planner", planner), ("--mode", mode)):
        if value is None:
            parser.error(f"{name} is required (flag or config file)")
    if planner not in PLANNER_NAMES:
        parser.error(f"unknown planner '{planner}'")
    try:
        mode = SimMode(mode)
    except ValueError:
        parser.error(f"unknown mode '{mode}'")
    seed = pick(args.seed, "seed", 0)
    jobs = pick(args.jobs, "jobs", 1)
    if not isinstance(seed, int) or isinstance(seed, bool):
        parser.error("--seed must be an integer")
    if not isinstance(jobs, int) or isinstance(jobs, bool) or jobs < 1:
        parser.error("--jobs must be a positive integer")
    endpoint = pick(args.endpoint, "endpoint")
    if planner == "remote" and not endpoint:
        parser.error("remote planner requires --endpoint")
    return HarnessConfig(
        scenario_dir=Path(scenarios),
        output_dir=Path(out),
        planner=planner,
        mode=mode,
        seed=seed,
        jobs=jobs,
        endpoint=endpoint,
        settings=settings,
    )


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = _make_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required (run, render, validate)")
    try:
        if args.command == "run":
            cfg = _resolve_run_config(args, parser)
            report = run_benchmark(cfg)
            for row in report["scenarios"]:
                print(f"{row['scenario']}: score={row['score']:.2f}")
            for skip in report["skipped"]:
                print(f"skipped {skip['scenario']}: {skip['error']}", file=sys.stderr)
            agg = report["aggregate"]
            print(
                f"{report['planner']} {report['mode']}: aggregate score "
                f"{agg['score']:.2f} over {agg['scenario_count']} scenarios"
            )
            return EXIT_OK
        if args.command == "render":
            out_dir = args.out if args.out is not None else args.run
            count = render_run(args.run, args.scenarios, out_dir)
            print(f"rendered {count} figures to {out_dir}")
            return EXIT_OK
        if args.command == "validate":
            results = validate_scenarios(args.scenarios)
            bad = 0
            for name, error in results:
                if error is None:
                    print(f"{name}: ok")
                else:
                    bad += 1
                    print(f"{name}: {error}")
            if bad:
                print(f"{bad} invalid scenario(s)", file=sys.stderr)
                return EXIT_DATA
            return EXIT_OK
        parser.error(f"unknown command {args.command!r}")
    except (ScenarioError, ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
