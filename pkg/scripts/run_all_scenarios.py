#!/usr/bin/env python3
"""Run every built-in scenario, print its checks and write artifacts.

Usage: python scripts/run_all_scenarios.py [--out OUT_DIR] [--fast]

--fast shrinks the big rotational sweep so the whole run takes seconds.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from midplanes.io import write_obj, write_report_json, write_solutions_csv
from midplanes.scenarios import run_scenario, scenario_library


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None, help="artifact directory")
    parser.add_argument("--fast", action="store_true",
                        help="shrink the large sweeps for a quick pass")
    args = parser.parse_args()

    all_ok = True
    for sc in scenario_library():
        if args.fast and sc.name == "counterexample":
            sc = sc.with_grids((6, 6), (6, 6))
        t0 = time.perf_counter()
        result, checks = run_scenario(sc)
        dt = time.perf_counter() - t0
        counts = result.status_counts()
        print(f"=== {sc.name}: {dt:.1f} s, {counts.get('converged', 0)} converged "
              f"seeds, {len(result.solutions)} solutions")
        for c in checks:
            print(f"    [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
            all_ok &= c.passed
        if args.out:
            out = Path(args.out) / sc.name
            out.mkdir(parents=True, exist_ok=True)
            write_solutions_csv(str(out / "solutions.csv"), result)
            write_obj(str(out / "points.obj"), result)
            write_report_json(str(out / "report.json"), result, checks)
    return 0 if all_ok else 3


if __name__ == "__main__":
    raise SystemExit(main())
