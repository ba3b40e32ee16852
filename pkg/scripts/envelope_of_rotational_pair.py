#!/usr/bin/env python3
"""Sweep the rotational pair with a planar equal-parameter envelope and dump
the point cloud, split by branch.

The equal-parameter family lands in {z = 0}; the opposite-meridian branch
(theta2 = theta1 + pi) is genuinely solvable too and leaves the plane.  The
script prints both branches' z-ranges and writes OBJ clouds for inspection.

Usage: python scripts/envelope_of_rotational_pair.py [--grid N] [--out DIR]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from midplanes.scenarios import is_equal_parameter_pair, make_counterexample_scenario, run_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", type=int, default=10, help="grid count per axis")
    parser.add_argument("--out", default=None, help="output directory for OBJ clouds")
    args = parser.parse_args()

    sc = make_counterexample_scenario(grid1=(args.grid, args.grid),
                                      grid2=(args.grid, args.grid))
    t0 = time.perf_counter()
    result, checks = run_scenario(sc, attach_diagnostics=False)
    print(f"sweep: {time.perf_counter() - t0:.1f} s, "
          f"{len(result.solutions)} solutions")

    diagonal, other = [], []
    for sol in result.solutions:
        (diagonal if is_equal_parameter_pair(sol, angular_dims=(1,)) else other).append(sol)
    for name, sols in (("equal-parameter family", diagonal), ("other branches", other)):
        if not sols:
            continue
        zs = np.array([abs(float(s.point[2])) for s in sols])
        print(f"{name}: {len(sols)} points, |z| in [{zs.min():.2e}, {zs.max():.2e}]")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, sols in (("planar_family", diagonal), ("other_branches", other)):
            lines = [f"v {s.point[0]:.17g} {s.point[1]:.17g} {s.point[2]:.17g}"
                     for s in sols]
            (out / f"{name}.obj").write_text("\n".join(lines) + "\n")
            print(f"wrote {out / (name + '.obj')}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
