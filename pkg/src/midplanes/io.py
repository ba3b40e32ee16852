"""Config parsing, solution export (CSV / OBJ / JSON) and re-verification.

The CSV is the canonical artifact: one row per emitted solution, numbers with
17 significant digits so float64 values round-trip exactly.  ``verify_csv``
recomputes every row from scratch and reports the deviations.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .envelope import build_pair, envelope_point
from .solver import SolverConfig, SolutionSet
from .surfaces import Surface

CSV_COLUMNS = [
    "seed_index", "u1", "v1", "u2", "v2", "x", "y", "z", "lambda",
    "residual", "delta", "smooth", "conic_class", "conic_center_dist",
    "contact_det",
]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class OutputSpec:
    csv: str | None = None
    obj: str | None = None
    report: str | None = None


@dataclass
class RunConfig:
    surface1: Surface | None
    surface2: Surface | None
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: OutputSpec = field(default_factory=OutputSpec)
    scenario: str | None = None


def _parse_surface(block: dict, name: str) -> Surface:
    kind = block.get("kind")
    if kind not in ("graph", "parametric"):
        raise ConfigError(f"[{name}] kind must be 'graph' or 'parametric'")
    variables = block.get("variables")
    if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
        raise ConfigError(f"[{name}] variables must be a list of names")
    domain = block.get("domain")
    if (not isinstance(domain, list) or len(domain) != len(variables)
            or not all(isinstance(r, list) and len(r) == 2 for r in domain)):
        raise ConfigError(f"[{name}] domain must give one [lo, hi] per variable")
    domain = [(float(lo), float(hi)) for lo, hi in domain]
    try:
        if kind == "graph":
            formula = block.get("f")
            if not isinstance(formula, str):
                raise ConfigError(f"[{name}] graph surfaces need a formula string 'f'")
            return Surface.graph(formula, variables, domain)
        components = block.get("components")
        if (not isinstance(components, list)
                or len(components) != len(variables) + 1
                or not all(isinstance(c, str) for c in components)):
            raise ConfigError(
                f"[{name}] parametric surfaces need {len(variables) + 1} "
                "component formula strings"
            )
        return Surface.parametric(components, variables, domain)
    except ConfigError:
        raise
    except Exception as err:
        raise ConfigError(f"[{name}] {err}") from err


_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}


def _parse_solver(block: dict) -> SolverConfig:
    unknown = set(block) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"[solver] unknown keys: {', '.join(sorted(unknown))}")
    kwargs = dict(block)
    for key in ("grid1", "grid2"):
        if key in kwargs:
            kwargs[key] = tuple(int(x) for x in kwargs[key])
    for key in ("box1", "box2"):
        if key in kwargs and kwargs[key] is not None:
            kwargs[key] = tuple((float(lo), float(hi)) for lo, hi in kwargs[key])
    try:
        return SolverConfig(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"[solver] {err}") from err


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config parse error: {err}") from err

    scenario = data.get("scenario")
    s1 = s2 = None
    if scenario is None:
        if "surface1" not in data or "surface2" not in data:
            raise ConfigError(
                "config needs [surface1] and [surface2] blocks (or a scenario name)"
            )
        s1 = _parse_surface(data["surface1"], "surface1")
        s2 = _parse_surface(data["surface2"], "surface2")
        if s1.dim != s2.dim:
            raise ConfigError("surfaces must have the same dimension")
    solver = _parse_solver(data.get("solver", {}))
    outputs_block = data.get("outputs", {})
    outputs = OutputSpec(
        csv=outputs_block.get("csv"),
        obj=outputs_block.get("obj"),
        report=outputs_block.get("report"),
    )
    return RunConfig(surface1=s1, surface2=s2, solver=solver,
                     outputs=outputs, scenario=scenario)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def solution_row(sol) -> dict:
    n = sol.pair.dim
    q1, q2 = sol.pair.params1, sol.pair.params2
    point = sol.point
    conic = sol.conic
    center_dist = math.nan
    contact_det = math.nan
    conic_class = ""
    if conic is not None:
        contact_det = conic.contact_det
        conic_class = conic.conic_class
        if conic.center is not None:
            center_dist = float(np.linalg.norm(conic.center - point))
    return {
        "seed_index": sol.seed_index if sol.seed_index is not None else -1,
        "u1": float(q1[0]), "v1": float(q1[1]) if n > 1 else 0.0,
        "u2": float(q2[0]), "v2": float(q2[1]) if n > 1 else 0.0,
        "x": float(point[0]), "y": float(point[1]),
        "z": float(point[2]) if point.size > 2 else 0.0,
        "lambda": float(sol.pair.lam),
        "residual": float(sol.residuals.max_abs),
        "delta": math.nan if sol.delta is None else float(sol.delta),
        "smooth": "" if sol.smooth is None else ("true" if sol.smooth else "false"),
        "conic_class": conic_class,
        "conic_center_dist": center_dist,
        "contact_det": contact_det,
    }


def write_solutions_csv(path: str, result: SolutionSet) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for sol in result.solutions:
        row = solution_row(sol)
        cells = []
        for col in CSV_COLUMNS:
            value = row[col]
            if col in ("smooth", "conic_class"):
                cells.append(str(value))
            elif col == "seed_index":
                cells.append(str(int(value)))
            else:
                cells.append(_fmt(float(value)))
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_solutions_csv(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV header in {path}")
        for raw in reader:
            row: dict = {}
            for col in CSV_COLUMNS:
                if col in ("smooth", "conic_class"):
                    row[col] = raw[col]
                elif col == "seed_index":
                    row[col] = int(raw[col])
                else:
                    row[col] = float(raw[col])
            rows.append(row)
    return rows


def write_obj(path: str, result: SolutionSet) -> None:
    """Envelope points as an OBJ vertex cloud (no faces)."""
    lines = []
    for sol in result.solutions:
        p = sol.point
        z = p[2] if p.size > 2 else 0.0
        lines.append(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(z)}")
    _atomic_write(path, "\n".join(lines) + "\n")


def run_report(result: SolutionSet, checks=None) -> dict:
    counts = result.status_counts()
    report = {
        "surface1": {"kind": result.surface1.kind,
                     "components": [str(c) for c in result.surface1.components],
                     "variables": list(result.surface1.variables),
                     "domain": [list(r) for r in result.surface1.domain]},
        "surface2": {"kind": result.surface2.kind,
                     "components": [str(c) for c in result.surface2.components],
                     "variables": list(result.surface2.variables),
                     "domain": [list(r) for r in result.surface2.domain]},
        "solver": {
            "tolerance": result.config.tolerance,
            "max_iterations": result.config.max_iterations,
            "damping": result.config.damping,
            "grid1": list(result.config.grid1),
            "grid2": list(result.config.grid2),
            "transversality_min": result.config.transversality_min,
            "dedup_radius": result.config.dedup_radius,
        },
        "seeds_total": len(result.records),
        "status_counts": counts,
        "solutions": len(result.solutions),
        "max_solution_residual": max(
            (float(s.residuals.max_abs) for s in result.solutions), default=None
        ),
    }
    if checks is not None:
        report["checks"] = [
            {"name": c.name, "passed": bool(c.passed), "detail": c.detail,
             "value": None if c.value is None else float(c.value)}
            for c in checks
        ]
    return report


def write_report_json(path: str, result: SolutionSet, checks=None) -> None:
    _atomic_write(path, json.dumps(run_report(result, checks), indent=1) + "\n")


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass
class VerifyReport:
    rows: int
    passed: bool
    max_point_deviation: float
    max_lambda_deviation: float
    max_residual: float
    max_delta_deviation: float
    max_center_dist: float
    failures: list[str] = field(default_factory=list)


def verify_csv(s1: Surface, s2: Surface, rows: list[dict],
               point_tol: float = 1e-8, residual_tol: float = 1e-6,
               delta_rtol: float = 1e-6, center_tol: float = 1e-6) -> VerifyReport:
    """Recompute every row from its parameter values and compare."""
    from .conics import contact_conic
    from .regularity import jg1_numeric

    n = s1.dim
    worst_point = worst_lambda = worst_res = worst_delta = worst_center = 0.0
    failures: list[str] = []
    for i, row in enumerate(rows):
        q1 = np.array([row["u1"], row["v1"]][:n])
        q2 = np.array([row["u2"], row["v2"]][:n])
        try:
            pc = build_pair(s1, q1, s2, q2)
            sol = envelope_point(pc)
        except Exception as err:
            failures.append(f"row {i}: rebuild failed ({err})")
            continue
        stored = np.array([row["x"], row["y"], row["z"]][: n + 1])
        dev = float(np.max(np.abs(sol.point - stored)))
        worst_point = max(worst_point, dev)
        if dev > point_tol * (1.0 + float(np.linalg.norm(stored))):
            failures.append(f"row {i}: envelope point deviates by {dev:.3e}")
        lam_dev = abs(pc.lam - row["lambda"]) / max(abs(row["lambda"]), 1.0)
        worst_lambda = max(worst_lambda, lam_dev)
        if lam_dev > 1e-8:
            failures.append(f"row {i}: lambda deviates by {lam_dev:.3e}")
        res = float(sol.residuals.max_abs)
        worst_res = max(worst_res, res)
        if res > residual_tol:
            failures.append(f"row {i}: residual {res:.3e} above {residual_tol:.1e}")
        if not math.isnan(row["delta"]):
            det = float(np.linalg.det(jg1_numeric(sol)))
            delta_dev = abs(det - row["delta"]) / max(abs(row["delta"]), 1e-12)
            worst_delta = max(worst_delta, delta_dev)
            if delta_dev > delta_rtol:
                failures.append(f"row {i}: delta deviates by {delta_dev:.3e}")
        if row["conic_class"]:
            try:
                conic = contact_conic(sol)
                if conic.center is not None:
                    dist = float(np.linalg.norm(conic.center - sol.point))
                    worst_center = max(worst_center, dist)
                    if dist > center_tol:
                        failures.append(f"row {i}: conic center off by {dist:.3e}")
                if conic.conic_class != row["conic_class"]:
                    failures.append(
                        f"row {i}: conic class {conic.conic_class!r} "
                        f"!= stored {row['conic_class']!r}"
                    )
            except Exception as err:
                failures.append(f"row {i}: conic recheck failed ({err})")
    return VerifyReport(
        rows=len(rows), passed=not failures,
        max_point_deviation=worst_point, max_lambda_deviation=worst_lambda,
        max_residual=worst_res, max_delta_deviation=worst_delta,
        max_center_dist=worst_center, failures=failures,
    )
