#!/usr/bin/env python3
"""Run the beam-assist scenario with assist off and on, then compare.

    python3 scripts/assist_experiment.py --out runs/assist

Writes runs/assist/{off,on}/ with the usual run outputs and
runs/assist/report.json (plus SVG charts with --svg). The printed ratio is
mmWave goodput with assist over goodput without it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from fogv2x.cli import main as sim_main

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", default=str(ROOT / "scenarios" / "assist.json"))
    ap.add_argument("--out", default="runs/assist")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    dirs = []
    for mode in ("off", "on"):
        d = out / mode
        argv = ["run", "--scenario", args.scenario, "--assist", mode, "--out", str(d)]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        code = sim_main(argv)
        if code:
            return code
        dirs.append(str(d))
    report = out / "report.json"
    code = sim_main(["report", "--in", *dirs, "--out", str(report)] + (["--svg"] if args.svg else []))
    if code:
        return code

    rep = json.loads(report.read_text())
    ratio = rep["comparisons"][1]["ratios"].get("enh2:mmwave", {}).get("goodput_bps")
    frac = rep["runs"][0]["summary"]["run"].get("mmwave_overhead_fraction")
    print(f"mmWave goodput on/off ratio: {ratio}")
    print(f"overhead fraction with assist off: {frac}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
