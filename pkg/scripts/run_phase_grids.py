#!/usr/bin/env python3
"""Run the reference phase-transition grids and print a text phase diagram.

Presets:
  noise      lambda x sigma {0, 0.05, 0.1, 0.2, 0.4}   (n=100, d=4, L=3)
  dimension  lambda x d {2, 4, 8, 16, 32}, sigma=0.2   (n=100, L=3)
  count      lambda x L {3, 10, 25, 50, 100}, sigma=0.2 (n=100, d=2)

Each cell is marked B(lack)=trivial, G(ray)=violated, W(hite)=exact detection.
results.csv / timings.csv / meta.json land in the output directory.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from lassossc.experiment import ExperimentGrid, default_lambda_grid, load_results, run_experiment

PRESETS = {
    "noise": dict(axis2_name="sigma", axis2_values=(0.0, 0.05, 0.1, 0.2, 0.4), d=4),
    "dimension": dict(axis2_name="d", axis2_values=(2, 4, 8, 16, 32), sigma=0.2),
    "count": dict(axis2_name="L", axis2_values=(3, 10, 25, 50, 100), d=2, sigma=0.2),
}
MARKS = {"trivial": "B", "gray": "G", "white": "W"}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("preset", choices=sorted(PRESETS))
    parser.add_argument("--out", default=None, help="output directory (default grid_<preset>)")
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--seeds", type=int, default=1)
    parser.add_argument("--lambda-points", type=int, default=25)
    parser.add_argument("--max-iter", type=int, default=500)
    parser.add_argument("--master-seed", type=int, default=0)
    args = parser.parse_args()

    grid = ExperimentGrid(
        lambdas=default_lambda_grid(100, points=args.lambda_points),
        n=100,
        L=3,
        kappa=5.0,
        seeds=args.seeds,
        master_seed=args.master_seed,
        max_iter=args.max_iter,
        **PRESETS[args.preset],
    )
    out = Path(args.out or f"grid_{args.preset}")
    path = run_experiment(grid, out, workers=args.workers)
    rows = load_results(path)

    print(f"\n{grid.axis2_name} \\ lambda (min {grid.lambdas[0]:.3g}, max {grid.lambdas[-1]:.3g})")
    for i2, value in enumerate(grid.axis2_values):
        marks = []
        for il in range(len(grid.lambdas)):
            cell = [
                r
                for r in rows
                if r["axis2_value"] == float(value) and r["lambda"] == grid.lambdas[il]
            ]
            whites = sum(r["verdict"] == "white" for r in cell)
            if whites == len(cell):
                marks.append("W")
            elif whites > 0:
                marks.append("w")  # white in some seeds
            else:
                marks.append(MARKS[max(cell, key=lambda r: r["rel_violation"])["verdict"]])
        print(f"{value:>8} {''.join(marks)}")
    print(f"\nwrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
