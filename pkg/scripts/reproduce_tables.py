#!/usr/bin/env python3
"""Run the four standard convergence studies and print their rate tables.

Each study solves -laplace(u) = f with homogeneous Dirichlet data for a
manufactured sine solution, then reports six errors per level with the
observed log2 rates:

  1. perturbed quad grid, k=1, levels 3-5
  2. perturbed quad grid, k=2, levels 3-5
  3. mixed quad/pentagon/hexagon grid, k=1, levels 3-5
  4. 3D wedge grid, k=1, levels 2-4

Pass --csv-dir to also write one CSV per study.
"""

import argparse
import os
import time

from wglift import StudyConfig, run_study

STUDIES = [
    ("quad_k1", StudyConfig(family="quad", k=1, levels=(3, 4, 5))),
    ("quad_k2", StudyConfig(family="quad", k=2, levels=(3, 4, 5))),
    ("mixed_k1", StudyConfig(family="mixed", k=1, levels=(3, 4, 5))),
    ("wedge_k1", StudyConfig(family="wedge", k=1, levels=(2, 3, 4))),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv-dir", default="",
                        help="write <name>.csv per study into this directory")
    parser.add_argument("--only", choices=[n for n, _ in STUDIES], default=None,
                        help="run a single study")
    args = parser.parse_args()

    for name, config in STUDIES:
        if args.only and name != args.only:
            continue
        t0 = time.perf_counter()
        report = run_study(config)
        elapsed = time.perf_counter() - t0
        print(f"== {name}: family={config.family} k={config.k} "
              f"solution={config.resolved_solution()} ({elapsed:.1f} s)")
        print(report.table_str())
        print()
        if args.csv_dir:
            os.makedirs(args.csv_dir, exist_ok=True)
            path = os.path.join(args.csv_dir, f"{name}.csv")
            with open(path, "w") as fh:
                fh.write(report.csv_str())
            print(f"   wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
