#!/usr/bin/env python3
"""
Run benchmark experiments and property suites from the command line.

    python -m app.cli run --config configs/squint-l-scale-jump.json --out results --verify
    python -m app.cli compare --configs configs/*.json --workers 4
    python -m app.cli verify --suite projection --instances 100
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from tabulate import tabulate

from app.harness.config import load_config
from app.harness.experiment import run_experiment
from app.harness.persistence import save_trace
from app.harness.settings import LOG_FORMAT, get_settings
from app.harness.verification import SUITES, CheckResult, run_suite

logger = logging.getLogger(__name__)

EXIT_VERIFY_FAILED = 1
EXIT_ERROR = 2


def configure_logging(level: Optional[str] = None) -> None:
    level = (level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format=LOG_FORMAT)


def run_config(config_path: str, out_dir: Optional[str], verify: bool = False, seed: Optional[int] = None) -> Dict[str, Any]:
    """Run one config, write its trace when ``out_dir`` is set, and return the summary."""
    trace = run_experiment(load_config(config_path), verify=verify, seed=seed)
    summary = dict(trace.summary)
    if out_dir:
        paths = save_trace(trace, out_dir)
        summary["csv"] = paths["csv"]
    return summary


def run_configs(
    config_paths: List[str],
    out_dir: Optional[str],
    verify: bool = False,
    seed: Optional[int] = None,
    workers: int = 1,
) -> List[Dict[str, Any]]:
    if workers <= 1 or len(config_paths) == 1:
        return [run_config(path, out_dir, verify, seed) for path in config_paths]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(run_config, path, out_dir, verify, seed) for path in config_paths]
        return [future.result() for future in futures]


def _number(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4g}"


def print_summaries(summaries: List[Dict[str, Any]]) -> None:
    headers = ["Experiment", "Algorithm", "Environment", "T", "Regret", "Bound", "Slack", "Restarts", "Time (s)", "Checks"]
    table_data = [
        [
            s["name"],
            s["algorithm"],
            s["environment"],
            s["horizon"],
            _number(s["final_regret"]),
            _number(s["bound"]),
            _number(s["slack"]),
            s["restart_count"],
            f"{s['wall_time_seconds']:.2f}",
            ("FAIL" if s["violations"] else "ok") if s["verified"] else "-",
        ]
        for s in summaries
    ]
    print(tabulate(table_data, headers=headers, tablefmt="pretty"))
    for s in summaries:
        for violation in s["violations"]:
            print(f"  {s['name']}: {violation}")


def print_checks(results: List[CheckResult]) -> None:
    headers = ["Suite", "Check", "Instances", "Result", "Detail"]
    table_data = [[r.suite, r.check, r.instances, "PASS" if r.passed else "FAIL", r.detail] for r in results]
    print(tabulate(table_data, headers=headers, tablefmt="pretty"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Lipschitz-adaptive online learning benchmarks")
    parser.add_argument("--log-level", help="Logging level (defaults to LIPSCHITZ_LOG_LEVEL)", default=None)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run one or more experiment configs")
    run.add_argument("--config", nargs="+", required=True, help="Path(s) to experiment config JSON")
    run.add_argument("--out", default=None, help="Output directory (defaults to LIPSCHITZ_OUTPUT_DIR)")
    run.add_argument("--verify", action="store_true", help="Check invariants at every round")
    run.add_argument("--seed", type=int, default=None, help="Override the environment seed")
    run.add_argument("--workers", type=int, default=None, help="Worker processes (defaults to LIPSCHITZ_WORKERS)")

    compare = commands.add_parser("compare", help="Run configs and print a comparison table")
    compare.add_argument("--configs", nargs="+", required=True, help="Paths to experiment config JSON")
    compare.add_argument("--out", default=None, help="Also write traces to this directory")
    compare.add_argument("--seed", type=int, default=None, help="Override the environment seed")
    compare.add_argument("--workers", type=int, default=None, help="Worker processes (defaults to LIPSCHITZ_WORKERS)")

    verify = commands.add_parser("verify", help="Run a randomized property suite")
    verify.add_argument("--suite", choices=sorted(SUITES), required=True)
    verify.add_argument("--instances", type=int, default=100, help="Random instances per check")
    verify.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    settings = get_settings()

    try:
        if args.command == "verify":
            results = run_suite(args.suite, args.instances, args.seed)
            print_checks(results)
            return 0 if all(r.passed for r in results) else EXIT_VERIFY_FAILED

        workers = args.workers if args.workers is not None else settings.workers
        if args.command == "run":
            out_dir = args.out or settings.output_dir
            summaries = run_configs(args.config, out_dir, args.verify, args.seed, workers)
        else:
            summaries = run_configs(args.configs, args.out, False, args.seed, workers)
    except (FileNotFoundError, ValidationError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR

    print_summaries(summaries)
    if any(s["violations"] for s in summaries):
        return EXIT_VERIFY_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())
