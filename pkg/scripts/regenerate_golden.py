#!/usr/bin/env python3
"""Regenerate the golden regression file for the generic scenario.

Run after an intentional change to solver behavior; commit the refreshed file
together with the change that motivated it.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from midplanes.scenarios import golden_summary, make_generic_scenario, run_scenario


def main() -> int:
    sc = make_generic_scenario()
    result, _ = run_scenario(sc)
    rows = golden_summary(result)
    out = Path(__file__).resolve().parents[1] / "src" / "midplanes" / "data" / "generic_golden.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(rows, indent=1))
    print(f"wrote {len(rows)} solutions to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
