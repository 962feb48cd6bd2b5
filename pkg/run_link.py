#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
RF/FSO relay link runner.

Loads a scenario file and runs one of:
  sweep     evaluate outage/capacity curves over a dB grid, write CSV + metadata sidecar
  validate  cross-check closed forms, quadrature and Monte Carlo, exit 1 on any FAIL
  sample    dump raw channel and SNDR samples as CSV

Usage:
python run_link.py sweep --scenario scenarios/fig1_detection_hardware.json --out results/fig1.csv
python run_link.py validate --scenario default --trials 1000000 --seed 7
python run_link.py sample --scenario default --count 100000 --out results/samples.csv
python run_link.py --list
"""

import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

# Add project root to path
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
sys.path.append(PROJECT_ROOT)

from rfso.core.errors import ConfigInvalid
from rfso.runner.sweep_runner import run_sample, run_sweep
from rfso.runner.validator import validate
from rfso.utils.logger import setup_logger
from rfso.utils.scenario import DEFAULT_TRIALS

SCENARIO_DIR = os.path.join(PROJECT_ROOT, "scenarios")
EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def parse_custom_params(params_str: Optional[str]) -> Dict:
    """
    Parse the ``--custom-params`` JSON override document.

    Args:
        params_str: JSON object text

    Returns:
        Dict: parsed overrides (empty when no text is given)

    Raises:
        ConfigInvalid: the text is not a JSON object
    """
    if not params_str:
        return {}
    try:
        params = json.loads(params_str)
    except json.JSONDecodeError as e:
        raise ConfigInvalid([f"--custom-params: {e.msg} at column {e.colno}"]) from e
    if not isinstance(params, dict):
        raise ConfigInvalid(["--custom-params: expected a JSON object"])
    return params


def resolve_scenario_path(scenario: str) -> str:
    """Accept a file path or the name of a shipped scenario."""
    if os.path.exists(scenario):
        return scenario
    shipped = os.path.join(SCENARIO_DIR, scenario if scenario.endswith(".json") else f"{scenario}.json")
    return shipped if os.path.exists(shipped) else scenario


def list_available_scenarios() -> None:
    """
    List the shipped scenarios with their descriptions
    """
    if not os.path.isdir(SCENARIO_DIR):
        print("Error: Scenario directory does not exist")
        return

    print("\nAvailable scenarios:")
    print("=" * 60)
    for file_name in sorted(os.listdir(SCENARIO_DIR)):
        if not file_name.endswith(".json"):
            continue
        description, label = "", ""
        try:
            with open(os.path.join(SCENARIO_DIR, file_name), "r", encoding="utf-8") as f:
                document = json.load(f)
            description = document.get("description", "")
            label = document.get("label", "")
        except (OSError, json.JSONDecodeError):
            description = "(unreadable)"
        print(f"  - {file_name[:-5]} [{label}] {description}")
    print("-" * 60)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=str, default="default",
                        help="Scenario file or shipped scenario name (default: default)")
    common.add_argument("--seed", type=int, default=None, help="Root seed for Monte Carlo streams")
    common.add_argument("--workers", type=int, default=1, help="Worker threads (default: 1)")
    common.add_argument("--custom-params", type=str, help="JSON document deep-merged into the scenario")
    common.add_argument("--log-dir", type=str, default="logs", help="Log directory (default: logs)")
    common.add_argument("--log-level", type=str, default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Log level (default: INFO)")

    parser = argparse.ArgumentParser(description="RF/FSO relay link runner")
    parser.add_argument("--list", action="store_true", help="List shipped scenarios")
    commands = parser.add_subparsers(dest="command")

    sweep = commands.add_parser("sweep", parents=[common], help="Evaluate curves over a dB grid")
    sweep.add_argument("--out", type=str, help="CSV destination (default: results/<scenario>.csv)")
    sweep.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per point")
    sweep.add_argument("--axis", type=str, choices=["avg_snr_db", "gamma_th_db"], help="Sweep abscissa")
    sweep.add_argument("--grid", type=str, help="Grid as start:stop:step in dB")
    sweep.add_argument("--outputs", type=str, help="Comma-separated outputs, e.g. op_closed,op_mc")
    sweep.add_argument("--gamma-th-db", type=float, default=None, help="Outage threshold on the SNR axis, dB")
    sweep.add_argument("--no-progress", action="store_true", help="Hide the progress bar")

    check = commands.add_parser("validate", parents=[common], help="Cross-validate analytic results against Monte Carlo")
    check.add_argument("--out", type=str, help="Optional JSON destination for the report")
    check.add_argument("--trials", type=int, default=DEFAULT_TRIALS,
                       help=f"Monte Carlo trials per estimate (default: {DEFAULT_TRIALS})")

    sample = commands.add_parser("sample", parents=[common], help="Dump raw channel/SNDR samples as CSV")
    sample.add_argument("--out", type=str, required=True, help="CSV destination")
    sample.add_argument("--count", type=int, default=10_000, help="Number of samples (default: 10000)")
    return parser


def _split_outputs(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [item.strip() for item in text.split(",") if item.strip()]


def main(argv: Optional[List[str]] = None) -> int:
    """Main function"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list:
        list_available_scenarios()
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    logger = setup_logger("rfso", args.log_dir, getattr(logging, args.log_level), capture_warnings=True)
    cli_logger = logger.getChild("cli")
    scenario_path = resolve_scenario_path(args.scenario)

    try:
        overrides = parse_custom_params(args.custom_params)

        if args.command == "sweep":
            stem = os.path.splitext(os.path.basename(scenario_path))[0]
            out_path = args.out or os.path.join("results", f"{stem}.csv")
            result = run_sweep(
                scenario_path,
                out_path,
                workers=args.workers,
                overrides=overrides,
                logger=cli_logger,
                progress=not args.no_progress,
                axis=args.axis,
                grid=args.grid,
                outputs=_split_outputs(args.outputs),
                trials=args.trials,
                seed=args.seed,
                gamma_th_db=args.gamma_th_db,
            )
            print(f"Wrote {len(result.points)} rows to {result.csv_path} (metadata: {result.meta_path})")
            if result.failed_cells:
                print(f"Warning: {result.failed_cells} cell(s) could not be evaluated and were left empty")
            return EXIT_OK

        if args.command == "validate":
            report = validate(
                scenario_path,
                trials=args.trials,
                seed=1 if args.seed is None else args.seed,
                out_path=args.out,
                overrides=overrides,
                workers=args.workers,
                logger=cli_logger,
            )
            print(report.format_table())
            return report.exit_code

        out_path = run_sample(
            scenario_path,
            args.out,
            args.count,
            seed=1 if args.seed is None else args.seed,
            overrides=overrides,
            logger=cli_logger,
        )
        print(f"Wrote {args.count} samples to {out_path}")
        return EXIT_OK

    except ConfigInvalid as e:
        print(f"Configuration error{f' in {e.source}' if e.source else ''}:", file=sys.stderr)
        for message in e.messages:
            print(f"  - {message}", file=sys.stderr)
        cli_logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        cli_logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
