#!/usr/bin/env python3
"""Satisfaction rate versus target reliability level.

Sweeps the failure probability delta for both calibrators at a fixed
tolerance alpha and prints one row per (method, delta); OCE-RCPS should
track 1 - delta while OCE-CRC stays flat.
"""

import argparse
from pathlib import Path

from oce_rcps.calibrate import LambdaGrid
from oce_rcps.datagen import GeneratorParams, SplitSpec, generate_dataset
from oce_rcps.harness import TrialConfig, run_trials
from oce_rcps.risk import LossKind, OceCost


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--risk", default="cvar:0.9")
    ap.add_argument("--alpha", type=float, default=0.4)
    ap.add_argument("--deltas", default="0.4,0.3,0.2,0.1")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--grid", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--out", default="results/sweep.csv")
    args = ap.parse_args()

    pool = generate_dataset(GeneratorParams(), 1781, seed=20240501)
    cost = OceCost.parse(args.risk)
    deltas = [float(d) for d in args.deltas.split(",")]

    rows = ["method,delta,target,satisfaction_rate,median_rel_size"]
    for method in ("oce-crc", "oce-rcps"):
        for delta in deltas:
            config = TrialConfig(
                method=method, cost=cost, loss=LossKind("fnr"),
                alpha=args.alpha, delta=delta,
                grid=LambdaGrid(args.grid), split=SplitSpec(200, 800, 781),
            )
            _, summary = run_trials(pool, config, args.trials, args.seed, jobs=args.jobs)
            print(
                f"{method:>9}  delta {delta:.2f}  target {1 - delta:.2f}  "
                f"satisfaction {summary.satisfaction_rate:.3f}  "
                f"median rel size {summary.median_rel_size:.3f}"
            )
            rows.append(
                f"{method},{delta},{1 - delta},{summary.satisfaction_rate},"
                f"{summary.median_rel_size}"
            )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
