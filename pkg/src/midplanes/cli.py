"""Command-line interface.

Subcommands: ``solve`` (sweep a configured pair and export solutions),
``verify`` (recompute a solutions CSV from scratch), ``scenario``
(list / run the built-in scenario corpus), and the single-pair inspectors
``normal-form``, ``conic`` and ``regularity``.

Exit codes: 0 success, 1 usage or configuration error, 2 no solutions,
3 verification or scenario-check failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import io as mio
from .conics import contact_conic, normal_form
from .envelope import build_pair, envelope_point
from .regularity import jg1_closed_form, jg1_numeric, special_case_report
from .scenarios import get_scenario, run_scenario, scenario_library
from .solver import STATUS_CONVERGED, refine_pair, sweep


def _parse_grid(text: str, dim: int):
    """'5x5' or '5x5,7x7' -> one or two per-surface count tuples."""
    parts = text.split(",")
    if len(parts) not in (1, 2):
        raise ValueError("grid must be n1xn2 or n1xn2,n3xn4")
    grids = []
    for part in parts:
        counts = tuple(int(c) for c in part.lower().split("x"))
        if len(counts) != dim or any(c < 1 for c in counts):
            raise ValueError(f"grid {part!r} does not match surface dimension {dim}")
        grids.append(counts)
    if len(grids) == 1:
        grids.append(grids[0])
    return grids


def _apply_overrides(cfg: mio.RunConfig, args) -> mio.RunConfig:
    solver = cfg.solver
    updates = {}
    if args.tol is not None:
        updates["tolerance"] = args.tol
    if args.max_iter is not None:
        updates["max_iterations"] = args.max_iter
    if args.grid is not None:
        dim = cfg.surface1.dim if cfg.surface1 is not None else 2
        grid1, grid2 = _parse_grid(args.grid, dim)
        updates["grid1"] = grid1
        updates["grid2"] = grid2
    if updates:
        solver = dataclasses.replace(solver, **updates)
    return dataclasses.replace(cfg, solver=solver)


def _resolve_pair_surfaces(cfg: mio.RunConfig):
    if cfg.scenario is not None:
        sc = get_scenario(cfg.scenario)
        s1, s2 = sc.build()
        solver = cfg.solver if cfg.solver != mio.SolverConfig() else sc.solver
        return s1, s2, solver
    return cfg.surface1, cfg.surface2, cfg.solver


def cmd_solve(args) -> int:
    cfg = _apply_overrides(mio.load_config(args.config), args)
    s1, s2, solver = _resolve_pair_surfaces(cfg)
    result = sweep(s1, s2, solver)

    outputs = cfg.outputs
    wanted = set(args.format.split(",")) if args.format else None
    out_dir = args.out
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        if wanted is None or "csv" in wanted:
            outputs.csv = outputs.csv or os.path.join(out_dir, "solutions.csv")
        if wanted is None or "obj" in wanted:
            outputs.obj = outputs.obj or os.path.join(out_dir, "points.obj")
        if wanted is None or "json" in wanted:
            outputs.report = outputs.report or os.path.join(out_dir, "report.json")
    if outputs.csv and (wanted is None or "csv" in wanted):
        mio.write_solutions_csv(outputs.csv, result)
        print(f"wrote {outputs.csv} ({len(result.solutions)} rows)")
    if outputs.obj and (wanted is None or "obj" in wanted):
        mio.write_obj(outputs.obj, result)
        print(f"wrote {outputs.obj}")
    if outputs.report and (wanted is None or "json" in wanted):
        mio.write_report_json(outputs.report, result)
        print(f"wrote {outputs.report}")
    counts = result.status_counts()
    print(f"seeds: {len(result.records)}  converged: {counts.get(STATUS_CONVERGED, 0)}"
          f"  solutions: {len(result.solutions)}")
    return 0 if result.solutions else 2


def cmd_verify(args) -> int:
    cfg = mio.load_config(args.config)
    s1, s2, _ = _resolve_pair_surfaces(cfg)
    rows = mio.read_solutions_csv(args.input)
    report = mio.verify_csv(s1, s2, rows)
    print(f"rows: {report.rows}")
    print(f"max envelope-point deviation: {report.max_point_deviation:.3e}")
    print(f"max lambda deviation:         {report.max_lambda_deviation:.3e}")
    print(f"max residual:                 {report.max_residual:.3e}")
    print(f"max delta deviation:          {report.max_delta_deviation:.3e}")
    print(f"max conic-center distance:    {report.max_center_dist:.3e}")
    for line in report.failures[:20]:
        print(f"FAIL {line}")
    print("verification " + ("passed" if report.passed else "FAILED"))
    return 0 if report.passed else 3


def cmd_scenario(args) -> int:
    if args.action == "list":
        for sc in scenario_library():
            print(f"{sc.name:16s} {sc.description}")
        return 0
    sc = get_scenario(args.name)
    result, checks = run_scenario(sc)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        mio.write_solutions_csv(os.path.join(args.out, "solutions.csv"), result)
        mio.write_obj(os.path.join(args.out, "points.obj"), result)
        mio.write_report_json(os.path.join(args.out, "report.json"), result, checks)
        print(f"wrote artifacts to {args.out}")
    counts = result.status_counts()
    print(f"seeds: {len(result.records)}  converged: {counts.get(STATUS_CONVERGED, 0)}"
          f"  solutions: {len(result.solutions)}")
    ok = True
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        ok &= c.passed
    return 0 if ok else 3


def _pair_solution(args):
    cfg = mio.load_config(args.config)
    s1, s2, solver = _resolve_pair_surfaces(cfg)
    values = [float(x) for x in args.pair.split(",")]
    n = s1.dim
    if len(values) != 2 * n:
        raise mio.ConfigError(f"--pair needs {2 * n} comma-separated values")
    q1, q2 = np.array(values[:n]), np.array(values[n:])
    rec = refine_pair(s1, q1, s2, q2, solver)
    if rec.status != STATUS_CONVERGED:
        print(f"pair did not refine to a solution: {rec.status}", file=sys.stderr)
        return None
    sol = envelope_point(build_pair(s1, q1, s2, rec.params2))
    return sol


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=1, default=_json_default))


def cmd_normal_form(args) -> int:
    sol = _pair_solution(args)
    if sol is None:
        return 2
    nf = normal_form(sol)
    _print_json({
        "p": nf.p, "epsilon": nf.epsilon, "delta": nf.delta,
        "quad1": nf.quad1.tolist(), "quad2": nf.quad2.tolist(),
        "third1": nf.third1.tolist(), "third2": nf.third2.tolist(),
        "map_linear": nf.map.linear.tolist(),
        "map_translation": nf.map.translation.tolist(),
        "residuals": {
            "uv_coeff": nf.uv_coeff, "u2": nf.u2_residual,
            "slope": nf.slope_residual, "y_slope": nf.y_slope,
        },
    })
    return 0


def cmd_conic(args) -> int:
    sol = _pair_solution(args)
    if sol is None:
        return 2
    conic = contact_conic(sol)
    _print_json({
        "coefficients": conic.coefficients.tolist(),
        "class": conic.conic_class,
        "center": None if conic.center is None else conic.center.tolist(),
        "center_distance_to_envelope_point":
            None if conic.center is None
            else float(np.linalg.norm(conic.center - sol.point)),
        "contact_det": conic.contact_det,
        "nullspace_dim": conic.nullspace_dim,
        "third_derivatives": conic.third_derivatives.tolist(),
        "plane_origin": conic.plane_origin.tolist(),
        "plane_basis": conic.plane_basis.tolist(),
    })
    return 0


def cmd_regularity(args) -> int:
    sol = _pair_solution(args)
    if sol is None:
        return 2
    jg1 = jg1_numeric(sol)
    det = float(np.linalg.det(jg1))
    sigma = float(np.linalg.norm(jg1, ord=2))
    payload = {
        "jg1": jg1.tolist(),
        "delta": det,
        "smooth": bool(abs(det) > 1e-4 * sigma ** jg1.shape[0]),
    }
    if sol.pair.dim == 2:
        nf = normal_form(sol)
        conic = contact_conic(sol)
        report = special_case_report(nf, conic=conic, numeric_delta=det)
        payload["closed_form"] = jg1_closed_form(nf).tolist()
        payload["special_case"] = {
            "a_plus_b": report.a_plus_b,
            "quadric_case": report.quadric_case,
            "delta1_uvv": report.delta1_uvv, "delta1_vvv": report.delta1_vvv,
            "delta2_uvv": report.delta2_uvv, "delta2_vvv": report.delta2_vvv,
            "prefactor1": report.prefactor1, "prefactor2": report.prefactor2,
            "factored_delta": report.factored_delta,
            "mixed_cubics_vanish": report.mixed_cubics_vanish,
            "contact_exactly_3": report.contact_exactly_3,
            "verdict_consistent": report.verdict_consistent,
        }
    _print_json(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midplanes",
        description="Envelopes of mid-hyperplanes of hypersurface pairs: "
                    "solve, verify, and inspect contact conics and regularity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--tol", type=float, default=None, help="solver tolerance")
        p.add_argument("--max-iter", type=int, default=None, help="Newton iteration cap")
        p.add_argument("--grid", default=None,
                       help="grid counts, n1xn2[,n3xn4] (curves: n1[,n2])")

    p_solve = sub.add_parser("solve", help="sweep the configured pair")
    add_common(p_solve)
    p_solve.add_argument("--format", default=None,
                         help="comma list of outputs to write: csv,obj,json")
    p_solve.add_argument("--out", default=None, help="output directory")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="recompute a solutions CSV from scratch")
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--input", required=True, help="CSV written by solve")
    p_verify.set_defaults(func=cmd_verify)

    p_sc = sub.add_parser("scenario", help="list or run built-in scenarios")
    sc_sub = p_sc.add_subparsers(dest="action", required=True)
    sc_list = sc_sub.add_parser("list", help="list scenarios")
    sc_list.set_defaults(func=cmd_scenario, action="list")
    sc_run = sc_sub.add_parser("run", help="run one scenario and its checks")
    sc_run.add_argument("name")
    sc_run.add_argument("--out", default=None, help="artifact directory")
    sc_run.set_defaults(func=cmd_scenario, action="run")

    for name, func in (("normal-form", cmd_normal_form), ("conic", cmd_conic),
                       ("regularity", cmd_regularity)):
        p = sub.add_parser(name, help=f"{name} data of one refined pair")
        add_common(p)
        p.add_argument("--pair", required=True,
                       help="comma-separated parameters u1,v1,u2,v2 (curves: u1,u2)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except mio.ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
