"""Command line entry point: ``sim run`` and ``sim report``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, Scenario, parse_config
from .kpi import dump_json, write_outputs
from .report import ReportError, build_report, write_svgs
from .world import simulate

log = logging.getLogger("fogv2x")


def run_scenario(scenario: Scenario, out_dir, formats=("csv", "json")) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = simulate(scenario)
    write_outputs(result.records, result.summary, out, formats)
    (out / "cloud.jsonl").write_text("".join(line + "\n" for line in result.cloud_lines), encoding="utf-8")
    (out / "effective_config.json").write_text(dump_json(result.effective_config), encoding="utf-8")
    return 0


def _apply_overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    elif "SIM_SEED" in os.environ:
        raw["seed"] = int(os.environ["SIM_SEED"])
    if args.duration is not None:
        raw["duration_s"] = args.duration
    if args.assist is not None:
        raw["policy"] = {**raw.get("policy", {}), "assist": args.assist == "on"}
    return raw


def cmd_run(args) -> int:
    path = Path(args.scenario)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    if not isinstance(raw, dict):
        print("error: scenario must be a JSON object", file=sys.stderr)
        return 2
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    bad = set(formats) - {"csv", "json"}
    if bad:
        print(f"error: unknown format(s) {sorted(bad)}", file=sys.stderr)
        return 2
    try:
        scenario = parse_config(_apply_overrides(raw, args), base_dir=path.parent)
        return run_scenario(scenario, args.out, formats)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("simulation failed")
        print(f"error: {exc}", file=sys.stderr)
        return 1


def cmd_report(args) -> int:
    try:
        rep = build_report(args.inputs)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_json(rep), encoding="utf-8")
    if args.svg:
        write_svgs(rep, out.parent)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="Multi-RAT fog-orchestrated V2X simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--duration", type=float)
    r.add_argument("--out", required=True)
    r.add_argument("--format", default="csv,json")
    r.add_argument("--assist", choices=("on", "off"))
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="compare finished runs")
    rep.add_argument("--in", dest="inputs", nargs="+", required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--svg", action="store_true")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
