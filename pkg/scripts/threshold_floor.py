#!/usr/bin/env python
"""Tolerance sensitivity on a grid dense with open lines.

Augments the 13-bus fixture with extra non-operational lines and compares
tolerances at a fixed sample count: large tolerances accept open lines and
hit an error floor that no amount of samples removes, while small
tolerances keep decaying.
"""

import argparse

from gridtop.harness import plan_from_dict, run_experiment, write_error_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default="bus_13_3", help="fixture name or grid file")
    ap.add_argument("--extra-lines", type=int, default=50)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--samples", type=int, nargs="+", default=[800, 3200, 12800])
    ap.add_argument("--taus", type=float, nargs="+", default=[0.4, 0.2, 0.05, 0.01])
    ap.add_argument("-o", "--output", default="threshold_floor.csv")
    args = ap.parse_args()

    plan = plan_from_dict({
        "grid": args.grid,
        "augment_open_lines": args.extra_lines,
        "sample_counts": args.samples,
        "taus": args.taus,
        "trials": args.trials,
        "seed": args.seed,
    })
    result = run_experiment(plan)
    write_error_csv(args.output, result)
    for row in result.rows:
        m = row["m"] if row["m"] == float("inf") else int(row["m"])
        print(f"m={m:>6}  tau={row['tau']:<5}  mean_error={row['mean_error']:.4f}")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
