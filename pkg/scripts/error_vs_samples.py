#!/usr/bin/env python
"""Reconstruction error against sample count, one curve per tolerance.

Runs the full tolerance/sample-count sweep on a bundled fixture (or any
grid file) and writes a CSV plus an optional gnuplot companion.  Expect a
decay of the mean error with the sample count for small tolerances and a
flat floor once the tolerance is large enough to accept open lines.
"""

import argparse

from gridtop.harness import plan_from_dict, run_experiment, write_error_csv
from gridtop.harness.experiment import DEFAULT_SAMPLE_COUNTS, DEFAULT_TAUS, write_gnuplot_script


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default="bus_13_3", help="fixture name or grid file")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sigma-ratio", type=float, default=0.8,
                    help="injection noise relative to the mean load")
    ap.add_argument("--samples", type=int, nargs="+", default=list(DEFAULT_SAMPLE_COUNTS))
    ap.add_argument("--taus", type=float, nargs="+", default=list(DEFAULT_TAUS))
    ap.add_argument("-o", "--output", default="error_vs_samples.csv")
    ap.add_argument("--gnuplot", action="store_true")
    args = ap.parse_args()

    plan = plan_from_dict({
        "grid": args.grid,
        "sample_counts": args.samples,
        "taus": args.taus,
        "trials": args.trials,
        "seed": args.seed,
        "model": {"kind": "default", "sigma_ratio": args.sigma_ratio},
    })
    result = run_experiment(plan)
    write_error_csv(args.output, result)
    if args.gnuplot:
        write_gnuplot_script(args.output + ".gnuplot", args.output, result)
    for row in result.rows:
        m = row["m"] if row["m"] == float("inf") else int(row["m"])
        print(f"m={m:>6}  tau={row['tau']:<5}  mean_error={row['mean_error']:.4f}")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
