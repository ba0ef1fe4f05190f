#!/usr/bin/env python
"""Regenerate the bundled test grids.

The bundled fixtures mirror the standard feeders only structurally (bus,
substation, tie-switch, and extra-line counts); their impedances are
synthetic, drawn uniformly in [0.05, 0.3] per-unit with the pinned seeds
below.  Rerunning this script reproduces the shipped JSON byte for byte.
"""

from pathlib import Path

from gridtop.harness import generate_random_grid, write_grid

FIXTURES = {
    # name: (loads, substations, tie switches, extra open lines, seed)
    "bus_13_3": (13, 3, 3, 10, 20250213),
    "bus_29_1": (29, 1, 1, 20, 20250229),
    "bus_83_11": (83, 11, 13, 30, 20250283),
}


def main() -> None:
    out_dir = Path(__file__).resolve().parents[1] / "src" / "gridtop" / "fixtures"
    for name, (loads, subs, ties, extra, seed) in FIXTURES.items():
        grid, forest = generate_random_grid(
            loads, subs, extra, n_tie_lines=ties, seed=seed, name=name)
        path = out_dir / f"{name}.json"
        write_grid(path, grid, forest)
        print(f"{path}: {loads} loads / {subs} substations / {ties} ties / {extra} extra lines")


if __name__ == "__main__":
    main()
