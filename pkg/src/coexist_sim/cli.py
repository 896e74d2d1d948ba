"""Command line entry point: ``coexist-sim run|validate|sweep``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import ConfigError, ExperimentPlan, load_config, plan_to_dict, validate_plan
from .metrics import SUMMARY_HEADER, summary_rows
from .scenario import run_experiment
from .topology import PRESETS, CalibrationError

EXIT_OK, EXIT_CONFIG, EXIT_CALIBRATION = 0, 2, 3


def _plan_args(p: argparse.ArgumentParser, need_config: bool) -> None:
    p.add_argument("--config", required=need_config, help="YAML experiment plan")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", metavar="F", help="file arrival rates (files/s)")
    p.add_argument("--drops", type=int)
    p.add_argument("--duration", type=float, help="simulated seconds per run")
    p.add_argument("--seed", type=int, help="seed base")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coexist-sim", description="NR-U / Wi-Fi coexistence simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a plan and print the summary")
    _plan_args(run, need_config=False)
    run.add_argument("--out", help="also write CSVs and metadata here")
    val = sub.add_parser("validate", help="check a config file and print the resolved plan")
    val.add_argument("--config", required=True)
    sw = sub.add_parser("sweep", help="run a plan and write summary.csv, per-run CSVs and metadata.json")
    _plan_args(sw, need_config=False)
    sw.add_argument("--out", default="results")
    return ap


def resolve_plan(args) -> ExperimentPlan:
    plan = load_config(args.config) if getattr(args, "config", None) else ExperimentPlan()
    names = {"preset": "preset", "lambda_sweep": "lam", "drops": "drops", "duration": "duration", "seed_base": "seed"}
    overrides = {k: getattr(args, a, None) for k, a in names.items()}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        plan = dataclasses.replace(plan, **overrides)
        validate_plan(plan)
    return plan


def _progress(spec, m):
    print(f"  {spec.run_id} seed={spec.seed} nru_upt={m.mean_upt('nru') / 1e6:.2f}Mb/s wifi_upt={m.mean_upt('wifi') / 1e6:.2f}Mb/s",
          file=sys.stderr, flush=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        plan = resolve_plan(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.cmd == "validate":
        print(json.dumps(plan_to_dict(plan), indent=2, sort_keys=True))
        return EXIT_OK
    out = Path(args.out) if args.out else None
    try:
        runs = run_experiment(plan, out, progress=_progress)
    except CalibrationError as e:
        print(f"calibration failed: {e}", file=sys.stderr)
        return EXIT_CALIBRATION
    print(",".join(SUMMARY_HEADER))
    for row in summary_rows(runs):
        print(",".join(row))
    if out is not None:
        print(f"wrote {out}/summary.csv, upt.csv, latency.csv, metadata.json", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
