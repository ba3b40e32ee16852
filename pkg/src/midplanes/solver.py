"""Sweep of the pair space for envelope configurations.

The solvability residual vanishes on an N-dimensional subset of the
2N-dimensional pair space.  Fixing the first point on a grid reduces the
problem to generically isolated roots in the second patch's parameters, found
by damped Newton with finite-difference Jacobians.  All seeds of one grid
node advance in lockstep through vectorized residual evaluations; pairs whose
residual already vanishes (symmetric families) are accepted immediately.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .envelope import EnvelopeSolution, build_pair, envelope_point
from .jets import EvalGuard, eval_jet
from .surfaces import Surface

STATUS_CONVERGED = "converged"
STATUS_DIVERGED = "diverged"
STATUS_REJECTED_TRANSVERSALITY = "rejected-transversality"
STATUS_REJECTED_DOMAIN = "rejected-domain"

_ACTIVE, _CONV, _DIV, _TRANS, _DOM = 0, 1, 2, 3, 4
_STATUS_NAMES = {
    _CONV: STATUS_CONVERGED,
    _DIV: STATUS_DIVERGED,
    _TRANS: STATUS_REJECTED_TRANSVERSALITY,
    _DOM: STATUS_REJECTED_DOMAIN,
}
_EPS = np.finfo(float).eps


@dataclass
class SolverConfig:
    """Newton and sweep tunables; grids sit at cell centers of the boxes."""

    tolerance: float = 1e-10
    max_iterations: int = 50
    damping: float = 0.5
    max_damping_steps: int = 20
    grid1: tuple[int, ...] = (5, 5)
    grid2: tuple[int, ...] = (5, 5)
    box1: tuple[tuple[float, float], ...] | None = None  # default: surface domain
    box2: tuple[tuple[float, float], ...] | None = None
    transversality_min: float = 1e-6
    dedup_radius: float = 1e-6

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations < 1 or not 0 < self.damping < 1:
            raise ValueError("tolerance, iterations and damping must be positive")
        if any(c < 1 for c in self.grid1) or any(c < 1 for c in self.grid2):
            raise ValueError("grid counts must be >= 1")


@dataclass
class SeedRecord:
    node_index: int
    seed_index: int
    status: str
    params1: np.ndarray
    params2: np.ndarray | None
    residual_norm: float
    iterations: int


@dataclass
class SolutionSet:
    surface1: Surface
    surface2: Surface
    config: SolverConfig
    solutions: list[EnvelopeSolution] = field(default_factory=list)
    records: list[SeedRecord] = field(default_factory=list)

    def status_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.status] = counts.get(r.status, 0) + 1
        return counts


def grid_nodes(box, counts) -> np.ndarray:
    """Cell-center grid over the box, row-major with the last axis fastest."""
    axes = [
        lo + (hi - lo) * (np.arange(c) + 0.5) / c
        for (lo, hi), c in zip(box, counts)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


# ---------------------------------------------------------------------------
# Vectorized residual evaluation
# ---------------------------------------------------------------------------


def _surface_batch(s: Surface, q: np.ndarray, order: int = 2) -> SimpleNamespace:
    """Positions, tangents, conormals (and metrics, at order 2) of a patch at
    a batch of parameter points, with a per-lane validity mask instead of
    exceptions."""
    k, n = q.shape
    m = n + 1
    guard = EvalGuard((k,))
    coords = [np.ascontiguousarray(q[:, i]) for i in range(n)]
    with np.errstate(all="ignore"):
        if s.kind == "graph":
            fj = eval_jet(s.components[0], coords, order=order, guard=guard)
            space = fj.space
            pos = np.empty((k, m))
            pos[:, :n] = q
            pos[:, n] = fj.coeffs[0]
            grad = np.stack(
                [fj.coeffs[space.index[tuple(1 if t == i else 0 for t in range(n))]]
                 for i in range(n)], axis=-1,
            )
            tan = np.zeros((k, n, m))
            for i in range(n):
                tan[:, i, i] = 1.0
                tan[:, i, n] = grad[:, i]
            h = None
            if order >= 2:
                h = np.empty((k, n, n))
                for i in range(n):
                    for jdx in range(i, n):
                        alpha = tuple(
                            (1 if t == i else 0) + (1 if t == jdx else 0)
                            for t in range(n)
                        )
                        idx = space.index[alpha]
                        val = fj.coeffs[idx] * space.deriv_factor[idx]
                        h[:, i, jdx] = val
                        h[:, jdx, i] = val
            nu = np.concatenate([-grad, np.ones((k, 1))], axis=1)
            ok = guard.ok.copy()
        else:
            jets = [eval_jet(c, coords, order=order, guard=guard) for c in s.components]
            space = jets[0].space
            pos = np.stack([j.coeffs[0] for j in jets], axis=-1)
            tan = np.empty((k, n, m))
            for i in range(n):
                idx = space.index[tuple(1 if t == i else 0 for t in range(n))]
                for c in range(m):
                    tan[:, i, c] = jets[c].coeffs[idx]
            if n == 1:
                nu = np.stack([-tan[:, 0, 1], tan[:, 0, 0]], axis=-1)
            else:
                nu = np.cross(tan[:, 0, :], tan[:, 1, :])
            h = None
            if order >= 2:
                second = np.empty((k, n, n, m))
                for i in range(n):
                    for jdx in range(i, n):
                        alpha = tuple(
                            (1 if t == i else 0) + (1 if t == jdx else 0)
                            for t in range(n)
                        )
                        idx = space.index[alpha]
                        fac = space.deriv_factor[idx]
                        for c in range(m):
                            val = jets[c].coeffs[idx] * fac
                            second[:, i, jdx, c] = val
                            second[:, jdx, i, c] = val
                h = np.einsum("kijm,km->kij", second, nu)
            tan_scale = np.prod(np.linalg.norm(tan, axis=2), axis=1)
            ok = guard.ok & (np.linalg.norm(nu, axis=1) > 1e-12 * np.maximum(tan_scale, _EPS))
        ok &= np.isfinite(pos).all(axis=1) & np.isfinite(tan).all(axis=(1, 2))
        if h is not None:
            ok &= np.isfinite(h).all(axis=(1, 2))
    return SimpleNamespace(pos=pos, tan=tan, nu=nu, h=h, ok=ok)


def _static_lanes(s: Surface, points: np.ndarray) -> SimpleNamespace:
    """First-patch frame data as per-lane arrays (one row per evaluation)."""
    d = _surface_batch(s, points)
    d.gram = np.einsum("knm,kpm->knp", d.tan, d.tan)
    return d


def _take_lanes(st: SimpleNamespace, idx) -> SimpleNamespace:
    return SimpleNamespace(pos=st.pos[idx], tan=st.tan[idx], nu=st.nu[idx],
                           h=st.h[idx], gram=st.gram[idx], ok=st.ok[idx])


def _static_point(s: Surface, params: np.ndarray) -> SimpleNamespace:
    st = _static_lanes(s, np.asarray(params, dtype=float)[None, :])
    if not st.ok[0]:
        raise ValueError(f"invalid base point {params} on {s.kind} surface")
    return st


def _perp_unit(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors orthogonal to the rows of a (k, 2) array."""
    perp = np.stack([-r[:, 1], r[:, 0]], axis=-1)
    norm = np.linalg.norm(perp, axis=1)
    ok = norm > 0.0
    safe = np.where(ok, norm, 1.0)
    return perp / safe[:, None], ok




def _residual_batch(st1: SimpleNamespace, s2: Surface, q: np.ndarray,
                    transversality_min: float) -> tuple[np.ndarray, np.ndarray]:
    """Solvability residual of per-lane (first point, second point) pairs;
    ``st1`` carries the first-patch data with one row per lane.

    Returns (residuals (k, N), status codes (k,)); lanes with nonzero status
    carry NaN residuals.
    """
    k, n = q.shape
    status = np.zeros(k, dtype=np.int8)
    res = np.full((k, n), np.nan)
    with np.errstate(all="ignore"):
        d2 = _surface_batch(s2, q)
        status[~d2.ok] = _DOM
        status[~st1.ok] = _DOM

        nu1 = st1.nu
        n1sq = np.einsum("km,km->k", nu1, nu1)
        n2sq = np.einsum("km,km->k", d2.nu, d2.nu)
        dot = np.einsum("km,km->k", d2.nu, nu1)
        sin2 = 1.0 - dot * dot / np.maximum(n1sq * n2sq, _EPS)
        bad = (status == 0) & (sin2 < transversality_min**2)
        status[bad] = _TRANS

        c_vec = (st1.pos - d2.pos) / 2.0
        c_norm = np.linalg.norm(c_vec, axis=1)
        scale = np.maximum(np.linalg.norm(st1.pos, axis=1), 1.0)
        coincident = (status == 0) & (
            c_norm < 1e-8 * np.maximum(scale, np.linalg.norm(d2.pos, axis=1))
        )
        status[coincident] = _DOM

        if n == 2:
            # the raw cross-product orientation keeps the coplanarity residual
            # smooth across the solution set; sign canonicalization would put
            # a kink right where Newton needs differentiability
            z = np.cross(nu1, d2.nu)
            z_norm = np.linalg.norm(z, axis=1)
            z = z / np.where(z_norm > 0, z_norm, 1.0)[:, None]
            # Z in each patch's parameter coordinates, then the h-orthogonal
            # directions as in-plane perpendiculars of h @ z
            rhs1 = np.einsum("km,knm->kn", z, st1.tan)
            det_g1 = np.linalg.det(st1.gram)
            gram1 = st1.gram.copy()
            sing = (status == 0) & (np.abs(det_g1) <= _EPS)
            status[sing] = _DOM
            gram1[det_g1 == 0] = np.eye(2)
            c1 = np.linalg.solve(gram1, rhs1[..., None])[..., 0]
            y1p, ok1 = _perp_unit(np.einsum("knp,kp->kn", st1.h, c1))
            gram2 = np.einsum("knm,kpm->knp", d2.tan, d2.tan)
            rhs2 = np.einsum("knm,km->kn", d2.tan, z)
            det_g2 = np.linalg.det(gram2)
            sing = (status == 0) & (np.abs(det_g2) <= _EPS)
            status[sing] = _DOM
            gram2[det_g2 == 0] = np.eye(2)
            c2 = np.linalg.solve(gram2, rhs2[..., None])[..., 0]
            y2p, ok2 = _perp_unit(np.einsum("knp,kp->kn", d2.h, c2))
            bad = (status == 0) & ~(ok1 & ok2)
            status[bad] = _DOM
            y1 = np.einsum("kn,knm->km", y1p, st1.tan)
            y2 = np.einsum("kn,knm->km", y2p, d2.tan)
        else:
            y1p = np.ones((k, 1))
            y2p = np.ones((k, 1))
            y1 = st1.tan[:, 0, :]
            y2 = d2.tan[:, 0, :]

        nu1_y2 = np.einsum("km,km->k", y2, nu1)
        nu2_y1 = np.einsum("km,km->k", d2.nu, y1)
        guard1 = 1e-12 * np.sqrt(n1sq) * np.linalg.norm(y2, axis=1)
        guard2 = 1e-12 * np.sqrt(n2sq) * np.linalg.norm(y1, axis=1)
        bad = (status == 0) & ((np.abs(nu1_y2) <= guard1) | (np.abs(nu2_y1) <= guard2))
        status[bad] = _TRANS

        h1_val = np.einsum("kn,knp,kp->k", y1p, st1.h, y1p)
        h2_val = np.einsum("kn,knp,kp->k", y2p, d2.h, y2p)
        h_scale1 = np.max(np.abs(st1.h), axis=(1, 2)) + _EPS
        h_scale2 = np.max(np.abs(d2.h), axis=(1, 2)) + _EPS
        bad = (status == 0) & (
            (np.abs(h1_val) <= 1e-12 * h_scale1) | (np.abs(h2_val) <= 1e-12 * h_scale2)
        )
        status[bad] = _DOM

        denom = nu2_y1**2 * h2_val
        safe = np.where(denom != 0.0, denom, 1.0)
        lam = np.cbrt(nu1_y2**2 * h1_val / safe)

        nu1_c = np.einsum("km,km->k", c_vec, nu1)
        nu2_c = np.einsum("km,km->k", d2.nu, c_vec)
        r0 = (nu1_c + lam * nu2_c) / (np.abs(nu1_c) + np.abs(lam * nu2_c) + _EPS)

        if n == 2:
            basis = np.stack([y1, y2, z], axis=-1)
            det_b = np.linalg.det(basis)
            col_scale = np.prod(np.linalg.norm(basis, axis=1), axis=1)
            sing = (status == 0) & (np.abs(det_b) <= 1e-12 * np.maximum(col_scale, _EPS))
            status[sing] = _DOM
            basis[np.abs(det_b) == 0.0] = np.eye(3)
            coeffs = np.linalg.solve(basis, c_vec[..., None])[..., 0]
            alpha = coeffs[:, 2] / np.maximum(c_norm, _EPS)
            out = np.stack([r0, alpha], axis=-1)
        else:
            out = r0[:, None]

        good = status == 0
        good &= np.isfinite(out).all(axis=1)
        status[(status == 0) & ~np.isfinite(out).all(axis=1)] = _DOM
        res[good] = out[good]
    return res, status


# ---------------------------------------------------------------------------
# Lockstep damped Newton
# ---------------------------------------------------------------------------


def _newton_batch(st1, s2: Surface, seeds: np.ndarray, box: np.ndarray,
                  cfg: SolverConfig):
    """Damped Newton on all lanes at once (``st1`` rows aligned with seeds).
    Returns final parameters, residual norms, integer status codes and
    iteration counts, all aligned to the input lanes."""
    k, n = seeds.shape
    steps = 1e-6 * (box[:, 1] - box[:, 0])
    q = seeds.astype(float).copy()
    rnorm = np.full(k, np.nan)
    state = np.full(k, _ACTIVE, dtype=np.int8)
    iters = np.zeros(k, dtype=int)
    res = np.full((k, n), np.nan)

    r0, s0 = _residual_batch(st1, s2, q, cfg.transversality_min)
    res[:] = r0
    rn = np.max(np.abs(r0), axis=1)
    rnorm[:] = rn
    state[s0 != 0] = s0[s0 != 0]
    conv = (state == _ACTIVE) & (rn < cfg.tolerance)
    state[conv] = _CONV

    def inside(qs):
        return np.all((qs >= box[:, 0]) & (qs <= box[:, 1]), axis=1)

    for _ in range(cfg.max_iterations):
        act = np.flatnonzero(state == _ACTIVE)
        if act.size == 0:
            break
        qa = q[act]
        ra = res[act]
        st_act = _take_lanes(st1, act)
        jac = np.empty((act.size, n, n))
        stencil_bad = np.zeros(act.size, dtype=bool)
        for dim in range(n):
            e = np.zeros(n)
            e[dim] = steps[dim]
            rp, sp = _residual_batch(st_act, s2, qa + e, cfg.transversality_min)
            rm, sm = _residual_batch(st_act, s2, qa - e, cfg.transversality_min)
            stencil_bad |= (sp != 0) | (sm != 0)
            jac[:, :, dim] = (rp - rm) / (2.0 * steps[dim])
        with np.errstate(all="ignore"):
            det = np.linalg.det(np.where(np.isfinite(jac), jac, 0.0)[:, :, :])
        solvable = np.isfinite(det) & (np.abs(det) > 0.0) & ~stencil_bad
        state[act[~solvable]] = _DIV
        good = np.flatnonzero(solvable)
        if good.size == 0:
            continue
        idx = act[good]
        step_dir = np.linalg.solve(jac[good], -ra[good][..., None])[..., 0]

        remaining = np.arange(idx.size)
        scale_fac = np.ones(idx.size)
        improved = np.zeros(idx.size, dtype=bool)
        for _halve in range(cfg.max_damping_steps + 1):
            if remaining.size == 0:
                break
            sub = idx[remaining]
            cand = q[sub] + scale_fac[remaining, None] * step_dir[remaining]
            ok_in = inside(cand)
            rc, sc = _residual_batch(_take_lanes(st1, sub), s2, cand,
                                     cfg.transversality_min)
            rcn = np.max(np.abs(rc), axis=1)
            accept = ok_in & (sc == 0) & np.isfinite(rcn) & (rcn < rnorm[sub])
            acc_local = remaining[accept]
            if acc_local.size:
                gi = idx[acc_local]
                q[gi] = cand[accept]
                res[gi] = rc[accept]
                rnorm[gi] = rcn[accept]
                improved[acc_local] = True
            remaining = remaining[~accept]
            scale_fac[remaining] *= cfg.damping
        state[idx[~improved]] = _DIV
        iters[idx] += 1
        conv = (state == _ACTIVE) & (rnorm < cfg.tolerance)
        state[conv] = _CONV

    state[state == _ACTIVE] = _DIV
    return q, rnorm, state, iters


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def _boxes(s1: Surface, s2: Surface, cfg: SolverConfig):
    box1 = np.array(cfg.box1 if cfg.box1 is not None else s1.domain, dtype=float)
    box2 = np.array(cfg.box2 if cfg.box2 is not None else s2.domain, dtype=float)
    return box1, box2


def refine_pair(s1: Surface, params1, s2: Surface, seed2,
                cfg: SolverConfig | None = None) -> SeedRecord:
    """Newton-refine the second patch's parameters from one seed, first point
    fixed.  Accepts the seed immediately when its residual is already below
    tolerance (degenerate families like central conics)."""
    cfg = cfg or SolverConfig()
    _, box2 = _boxes(s1, s2, cfg)
    st1 = _static_point(s1, np.asarray(params1, dtype=float))
    seeds = np.asarray(seed2, dtype=float)[None, :]
    q, rnorm, state, iters = _newton_batch(st1, s2, seeds, box2, cfg)
    status = _STATUS_NAMES[int(state[0])]
    return SeedRecord(
        node_index=0, seed_index=0, status=status,
        params1=np.asarray(params1, dtype=float),
        params2=q[0] if status == STATUS_CONVERGED else None,
        residual_norm=float(rnorm[0]), iterations=int(iters[0]),
    )


def sweep(s1: Surface, s2: Surface, cfg: SolverConfig | None = None,
          attach_diagnostics: bool = True) -> SolutionSet:
    """Grid the first patch, refine every second-patch seed per node,
    deduplicate converged roots and attach envelope, regularity and conic
    diagnostics to each solution.  All node-seed lanes advance through one
    lockstep Newton run; deterministic for a fixed config."""
    from .conics import contact_conic
    from .regularity import delta as regularity_delta

    cfg = cfg or SolverConfig()
    box1, box2 = _boxes(s1, s2, cfg)
    nodes = grid_nodes(box1, cfg.grid1)
    seeds = grid_nodes(box2, cfg.grid2)
    n_nodes, n_seeds = len(nodes), len(seeds)
    out = SolutionSet(s1, s2, cfg)

    st_nodes = _static_lanes(s1, nodes)
    lane_node = np.repeat(np.arange(n_nodes), n_seeds)
    st_lanes = _take_lanes(st_nodes, lane_node)
    lane_seeds = np.tile(seeds, (n_nodes, 1))
    q, rnorm, state, iters = _newton_batch(st_lanes, s2, lane_seeds, box2, cfg)

    for node_idx, p1 in enumerate(nodes):
        base = node_idx * n_seeds
        kept: list[np.ndarray] = []
        for seed_idx in range(n_seeds):
            lane = base + seed_idx
            status = _STATUS_NAMES[int(state[lane])]
            out.records.append(SeedRecord(
                node_idx, seed_idx, status, p1.copy(),
                q[lane].copy() if status == STATUS_CONVERGED else None,
                float(rnorm[lane]), int(iters[lane]),
            ))
            if status != STATUS_CONVERGED:
                continue
            q2 = q[lane]
            if any(np.linalg.norm(q2 - prev) <= cfg.dedup_radius for prev in kept):
                continue
            sol = _verified_solution(s1, p1, s2, q2, cfg, attach_diagnostics,
                                     contact_conic, regularity_delta)
            if sol is None:
                out.records[-1].status = STATUS_DIVERGED
                continue
            kept.append(q2)
            sol.node_index = node_idx
            sol.seed_index = lane
            out.solutions.append(sol)
    return out


def _verified_solution(s1, p1, s2, q2, cfg, attach_diagnostics,
                       contact_conic, regularity_delta) -> EnvelopeSolution | None:
    try:
        pc = build_pair(s1, p1, s2, q2, transversality_min=cfg.transversality_min)
        sol = envelope_point(pc, tolerance=max(cfg.tolerance, 1e-10))
    except Exception:
        return None
    if not sol.converged:
        return None
    if attach_diagnostics:
        try:
            sol.delta, sol.smooth = regularity_delta(sol)
        except Exception as err:  # pragma: no cover - diagnostic failures are data
            sol.diagnostics_note = f"regularity failed: {err}"
        try:
            sol.conic = contact_conic(sol)
        except Exception as err:
            sol.diagnostics_note += f" conic failed: {err}"
    return sol
