#!/usr/bin/env python3
"""Monte-Carlo sweep of DSRC erasure probability and PDR against their design curves.

Prints one CSV row per point; pass --trials to trade accuracy for time.
"""

from __future__ import annotations

import argparse
import csv
import sys

from fogv2x.engine import RngStream
from fogv2x.rat import dsrc_erasure_prob, pdr_at_distance


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = RngStream(args.seed, "density_sweep")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["kind", "x", "analytic", "monte_carlo"])
    for n in (0, 5, 10, 20, 40, 80, 120, 160):
        p = dsrc_erasure_prob(n)
        mc = sum(rng.bernoulli(p) for _ in range(args.trials)) / args.trials
        w.writerow(["erasure", n, f"{p:.5f}", f"{mc:.5f}"])
    for rat in ("dsrc", "dsrc_px"):
        for d in (0, 100, 200, 300, 400, 600, 800, 1000):
            p = pdr_at_distance(rat, d)
            mc = sum(rng.bernoulli(p) for _ in range(args.trials)) / args.trials
            w.writerow([f"pdr_{rat}", d, f"{p:.5f}", f"{mc:.5f}"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
