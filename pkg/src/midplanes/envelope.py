"""Mid-hyperplane family of a surface pair and its envelope point.

For two patch points with transversal tangent spaces, the mid-hyperplane
passes through the pair's mid-point and contains the intersection Z of the two
tangent spaces.  A pair contributes a point of the envelope exactly when a
scalar conormal condition holds together with coplanarity of the mid-chord
with the two h-orthogonal directions; the envelope point then has a closed
form.  An independent least-squares oracle solves the defining linear system
directly and is used to cross-check the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jets import real_cbrt
from .surfaces import (
    AffineSubspace,
    DegenerateMetricError,
    GeometryError,
    Surface,
    SurfaceJet,
    TransversalFrame,
    TransversalityError,
    h_orthogonal_param,
    surface_jet,
    tangent_coordinates,
    tangent_intersection,
    transversal_frame,
    transversality_sine,
)

_EPS = np.finfo(float).eps


class PairError(GeometryError):
    """The pair cannot support a mid-hyperplane envelope computation."""


class CoincidentPairError(PairError):
    """The two points coincide (different stratum, not handled here)."""


class DegenerateBasisError(PairError):
    """{Y1, Y2, Z} fails to span the ambient space."""


class EnvelopeAtInfinityError(PairError):
    """The envelope point escapes to infinity (lambda + 4Ab = 0)."""


@dataclass
class PairConfiguration:
    """A surface pair with the derived frame data the envelope formulas need.

    ``y1``/``y2`` are scaled so their parameter coordinates have unit norm
    (first significant coefficient positive); the envelope point is invariant
    under any other choice.
    """

    surface1: Surface
    surface2: Surface
    params1: np.ndarray
    params2: np.ndarray
    jet1: SurfaceJet
    jet2: SurfaceJet
    frame1: TransversalFrame
    frame2: TransversalFrame
    mid_point: np.ndarray
    mid_chord: np.ndarray
    z_space: AffineSubspace
    y1: np.ndarray
    y2: np.ndarray
    y1_param: np.ndarray
    y2_param: np.ndarray
    lam: float            # conormal ratio of the solvability condition
    chord_coeff: float    # coefficient of y1 in the chord decomposition (A)
    alphas: np.ndarray    # chord coefficients along the Z directions
    coupling: float       # conormal coupling b = -h1(Y1,Y1)/nu2(Y1)
    envelope_coeff: float  # B = -lam A / (lam + 4 A b)
    nu1_c: float
    nu2_c: float
    nu1_y2: float
    nu2_y1: float
    h1_y1y1: float
    h2_y2y2: float
    convex: bool
    z1_params: np.ndarray = field(default=None)  # Z directions in surface-1 coords
    z2_params: np.ndarray = field(default=None)

    @property
    def dim(self) -> int:
        return self.surface1.dim


def build_pair(s1: Surface, params1, s2: Surface, params2, *,
               transversality_min: float = 1e-6) -> PairConfiguration:
    """Assemble the frame data of a pair: mid-point and mid-chord, tangent
    intersection, h-orthogonal directions, the conormal ratio, the chord
    decomposition and the envelope coefficient.

    Rejects coincident points, near-parallel tangent spaces, degenerate
    metrics along the h-orthogonal directions, a singular {Y1, Y2, Z} basis
    and pairs whose envelope point lies at infinity.
    """
    if s1.dim != s2.dim:
        raise ValueError("surfaces must have equal dimension")
    n = s1.dim
    j1 = surface_jet(s1, params1, order=2)
    j2 = surface_jet(s2, params2, order=2)
    fr1 = transversal_frame(j1)
    fr2 = transversal_frame(j2)

    mid_point = (j1.position + j2.position) / 2.0
    mid_chord = (j1.position - j2.position) / 2.0
    scale = max(np.linalg.norm(j1.position), np.linalg.norm(j2.position), 1.0)
    if np.linalg.norm(mid_chord) < 1e-8 * scale:
        raise CoincidentPairError("pair points coincide")

    sine = transversality_sine(fr1.conormal, fr2.conormal)
    if sine < transversality_min:
        raise TransversalityError(
            f"tangent spaces nearly parallel (sine of angle {sine:.3e})"
        )
    z = tangent_intersection(j1, j2, transversality_min)

    y1_param = h_orthogonal_param(j1, fr1, z)
    y2_param = h_orthogonal_param(j2, fr2, z)
    y1 = j1.tangents.T @ y1_param
    y2 = j2.tangents.T @ y2_param

    nu1_y2 = float(fr1.conormal @ y2)
    nu2_y1 = float(fr2.conormal @ y1)
    guard = 1e-12 * np.linalg.norm(fr1.conormal) * np.linalg.norm(y2)
    if abs(nu1_y2) <= guard:
        raise TransversalityError("nu1(Y2) vanishes; configuration degenerate")
    guard = 1e-12 * np.linalg.norm(fr2.conormal) * np.linalg.norm(y1)
    if abs(nu2_y1) <= guard:
        raise TransversalityError("nu2(Y1) vanishes; configuration degenerate")

    h1_y1y1 = float(y1_param @ fr1.metric @ y1_param)
    h2_y2y2 = float(y2_param @ fr2.metric @ y2_param)
    if abs(h1_y1y1) <= 1e-12 * np.max(np.abs(fr1.metric)) or \
       abs(h2_y2y2) <= 1e-12 * np.max(np.abs(fr2.metric)):
        raise DegenerateMetricError(
            "h(Y, Y) vanishes; the conormal-ratio root is undefined here"
        )

    lam = real_cbrt((nu1_y2**2 * h1_y1y1) / (nu2_y1**2 * h2_y2y2))

    basis = np.column_stack([y1, y2, *z.directions])
    det = np.linalg.det(basis)
    if abs(det) <= 1e-12 * np.prod(np.linalg.norm(basis, axis=0)):
        raise DegenerateBasisError("{Y1, Y2, Z} basis is singular")
    coeffs = np.linalg.solve(basis, mid_chord)
    chord_coeff = float(coeffs[0])
    alphas = coeffs[2:].copy()

    coupling = -h1_y1y1 / nu2_y1
    denom = lam + 4.0 * chord_coeff * coupling
    if abs(denom) <= 1e-10 * (abs(lam) + abs(4.0 * chord_coeff * coupling) + _EPS):
        raise EnvelopeAtInfinityError("lambda + 4Ab vanishes; point at infinity")
    envelope_coeff = -lam * chord_coeff / denom

    eig1 = np.linalg.eigvalsh(fr1.metric)
    eig2 = np.linalg.eigvalsh(fr2.metric)
    convex = bool(np.all(eig1 > 0) or np.all(eig1 < 0)) and bool(
        np.all(eig2 > 0) or np.all(eig2 < 0)
    )

    z1_params = np.array([tangent_coordinates(j1, d) for d in z.directions]).reshape(-1, n)
    z2_params = np.array([tangent_coordinates(j2, d) for d in z.directions]).reshape(-1, n)

    return PairConfiguration(
        surface1=s1, surface2=s2,
        params1=np.asarray(params1, dtype=float),
        params2=np.asarray(params2, dtype=float),
        jet1=j1, jet2=j2, frame1=fr1, frame2=fr2,
        mid_point=mid_point, mid_chord=mid_chord, z_space=z,
        y1=y1, y2=y2, y1_param=y1_param, y2_param=y2_param,
        lam=lam, chord_coeff=chord_coeff, alphas=alphas,
        coupling=coupling, envelope_coeff=envelope_coeff,
        nu1_c=float(fr1.conormal @ mid_chord),
        nu2_c=float(fr2.conormal @ mid_chord),
        nu1_y2=nu1_y2, nu2_y1=nu2_y1,
        h1_y1y1=h1_y1y1, h2_y2y2=h2_y2y2,
        convex=convex,
        z1_params=z1_params, z2_params=z2_params,
    )


@dataclass
class MidPlane:
    """The mid-hyperplane {X : normal . X = offset} of a pair."""

    normal: np.ndarray
    offset: float

    def value(self, x: np.ndarray) -> float:
        return float(self.normal @ x - self.offset)


class DegenerateMidPlaneError(PairError):
    """The mid-plane covector vanished."""


def mid_plane(pc: PairConfiguration) -> MidPlane:
    """The plane through the mid-point containing the tangent intersection:
    normal = nu2(C) nu1 + nu1(C) nu2, offset fixing the mid-point."""
    normal = pc.nu2_c * pc.frame1.conormal + pc.nu1_c * pc.frame2.conormal
    scale = (
        abs(pc.nu2_c) * np.linalg.norm(pc.frame1.conormal)
        + abs(pc.nu1_c) * np.linalg.norm(pc.frame2.conormal)
    )
    if np.linalg.norm(normal) <= 1e-12 * max(scale, _EPS):
        raise DegenerateMidPlaneError("mid-plane covector vanishes")
    return MidPlane(normal, float(normal @ pc.mid_point))


def solvability_residual(pc: PairConfiguration) -> np.ndarray:
    """Scale-free residual of the envelope conditions.

    Component 0 is the conormal condition nu1(C) + lambda nu2(C), normalized
    by the magnitudes of its two terms; components 1..N-1 are the chord
    coefficients along the Z directions, normalized by |C|.  The pair
    contributes an envelope point exactly when the whole vector vanishes.
    """
    r0 = (pc.nu1_c + pc.lam * pc.nu2_c) / (
        abs(pc.nu1_c) + abs(pc.lam * pc.nu2_c) + _EPS
    )
    c_norm = np.linalg.norm(pc.mid_chord)
    return np.concatenate([[r0], pc.alphas / c_norm])


@dataclass
class EnvelopeResiduals:
    solvability: np.ndarray
    midplane_value: float
    derivative_values: np.ndarray  # directional derivatives of F at X, scale-free

    @property
    def max_abs(self) -> float:
        return max(
            float(np.max(np.abs(self.solvability))),
            abs(self.midplane_value),
            float(np.max(np.abs(self.derivative_values))),
        )


@dataclass
class EnvelopeSolution:
    """A solved envelope point with verification residuals and diagnostics
    slots filled by the regularity and contact-conic modules."""

    point: np.ndarray
    pair: PairConfiguration
    residuals: EnvelopeResiduals
    converged: bool
    delta: float | None = None
    smooth: bool | None = None
    conic: object | None = None
    diagnostics_note: str = ""
    node_index: int | None = None
    seed_index: int | None = None


def midplane_value(s1: Surface, q1, s2: Surface, q2, x: np.ndarray) -> float:
    """The mid-plane function of the pair family evaluated at a fixed ambient
    point, using each patch's working-frame conormal."""
    j1 = surface_jet(s1, q1, order=1)
    j2 = surface_jet(s2, q2, order=1)
    nu1 = _conormal_order1(s1, j1)
    nu2 = _conormal_order1(s2, j2)
    c = (j1.position - j2.position) / 2.0
    m = (j1.position + j2.position) / 2.0
    return float(((nu2 @ c) * nu1 + (nu1 @ c) * nu2) @ (x - m))


def midplane_values_batch(s1: Surface, q1: np.ndarray, s2: Surface, q2: np.ndarray,
                          x: np.ndarray) -> np.ndarray:
    """Vectorized mid-plane function over batches of parameter pairs at a
    fixed ambient point (used by finite-difference diagnostics)."""
    from .solver import _surface_batch

    d1 = _surface_batch(s1, q1, order=1)
    d2 = _surface_batch(s2, q2, order=1)
    c = (d1.pos - d2.pos) / 2.0
    m = (d1.pos + d2.pos) / 2.0
    nu1_c = np.einsum("km,km->k", d1.nu, c)
    nu2_c = np.einsum("km,km->k", d2.nu, c)
    rel = x[None, :] - m
    return nu2_c * np.einsum("km,km->k", d1.nu, rel) + \
        nu1_c * np.einsum("km,km->k", d2.nu, rel)


def _conormal_order1(s: Surface, j: SurfaceJet) -> np.ndarray:
    from .surfaces import conormal_covector

    if s.kind == "graph":
        grad = j.tangents[:, -1]
        return np.concatenate([-grad, [1.0]])
    return conormal_covector(j.tangents)


def _f_scale(pc: PairConfiguration, x: np.ndarray) -> float:
    reach = np.linalg.norm(x - pc.mid_point) + np.linalg.norm(pc.mid_chord)
    return (
        abs(pc.nu2_c) * np.linalg.norm(pc.frame1.conormal)
        + abs(pc.nu1_c) * np.linalg.norm(pc.frame2.conormal)
        + np.linalg.norm(pc.frame1.conormal) * np.linalg.norm(pc.frame2.conormal)
        * np.linalg.norm(pc.mid_chord)
    ) * max(reach, 1e-12) + _EPS


def envelope_point(pc: PairConfiguration, tolerance: float = 1e-8,
                   fd_step: float = 1e-6) -> EnvelopeSolution:
    """Closed-form envelope point of a solvable pair:
    X = M + B (Y1 + (lambda nu2(Y1)/nu1(Y2)) Y2).

    The returned solution stores the solvability residual, the mid-plane value
    at X and the central-difference directional derivatives of the mid-plane
    function at X; ``converged`` requires them all below ``tolerance``.
    """
    kappa = pc.lam * pc.nu2_y1 / pc.nu1_y2
    x = pc.mid_point + pc.envelope_coeff * (pc.y1 + kappa * pc.y2)

    scale = _f_scale(pc, x)
    n = pc.dim
    # one batched pass over the whole directional-derivative stencil
    dirs1 = [pc.y1_param, *pc.z1_params]
    dirs2 = [pc.y2_param, *pc.z2_params]
    rows1, rows2 = [pc.params1], [pc.params2]
    for w in dirs1:
        rows1.extend([pc.params1 + fd_step * w, pc.params1 - fd_step * w])
        rows2.extend([pc.params2, pc.params2])
    for w in dirs2:
        rows1.extend([pc.params1, pc.params1])
        rows2.extend([pc.params2 + fd_step * w, pc.params2 - fd_step * w])
    values = midplane_values_batch(pc.surface1, np.array(rows1),
                                   pc.surface2, np.array(rows2), x)
    f_res = float(values[0]) / scale
    derivs = [
        float(values[1 + 2 * i] - values[2 + 2 * i]) / (2.0 * fd_step) / scale
        for i in range(2 * n)
    ]

    residuals = EnvelopeResiduals(
        solvability=solvability_residual(pc),
        midplane_value=f_res,
        derivative_values=np.array(derivs),
    )
    solv_ok = float(np.max(np.abs(residuals.solvability))) < tolerance
    membership_ok = residuals.max_abs < max(tolerance, 1e-6)
    return EnvelopeSolution(x, pc, residuals, converged=bool(solv_ok and membership_ok))


def conormal_directional_derivative(s: Surface, j: SurfaceJet,
                                    w_param: np.ndarray) -> np.ndarray:
    """Derivative of the working-frame conormal field along a tangent
    direction given in parameter coordinates, from second-order jet data."""
    if s.kind == "graph":
        hess = j.second[:, :, -1]
        return np.concatenate([-(hess @ w_param), [0.0]])
    from .surfaces import conormal_covector

    n = j.dim
    dt = np.einsum("ikm,k->im", j.second, w_param)  # dt[i] = d(tangent_i) along w
    out = np.zeros(j.position.size)
    for i in range(n):
        rows = j.tangents.copy()
        rows[i] = dt[i]
        out += conormal_covector(rows)
    return out


def envelope_point_linear_oracle(pc: PairConfiguration) -> tuple[np.ndarray, float]:
    """Independent check: assemble the mid-plane equation and its 2N
    directional-derivative equations as an affine-linear system in X and solve
    it by least squares.  Returns the solution and the scale-free residual
    norm of the system at it."""
    n = pc.dim
    nu1, nu2 = pc.frame1.conormal, pc.frame2.conormal
    c, m = pc.mid_chord, pc.mid_point
    rows = [pc.nu2_c * nu1 + pc.nu1_c * nu2]
    rhs = [float(rows[0] @ m)]

    for w_param in (pc.y1_param, *pc.z1_params):
        w_amb = pc.jet1.tangents.T @ w_param
        dnu1 = conormal_directional_derivative(pc.surface1, pc.jet1, w_param)
        dn = (float(nu2 @ w_amb) / 2.0) * nu1 + pc.nu2_c * dnu1 + float(dnu1 @ c) * nu2
        rows.append(dn)
        rhs.append(float(dn @ m + rows[0] @ w_amb / 2.0))

    for w_param in (pc.y2_param, *pc.z2_params):
        w_amb = pc.jet2.tangents.T @ w_param
        dnu2 = conormal_directional_derivative(pc.surface2, pc.jet2, w_param)
        dn = float(dnu2 @ c) * nu1 + pc.nu1_c * dnu2 - (float(nu1 @ w_amb) / 2.0) * nu2
        rows.append(dn)
        rhs.append(float(dn @ m + rows[0] @ w_amb / 2.0))

    a = np.array(rows)
    b = np.array(rhs)
    row_scale = np.linalg.norm(a, axis=1) + _EPS
    a_scaled = a / row_scale[:, None]
    b_scaled = b / row_scale
    x, *_ = np.linalg.lstsq(a_scaled, b_scaled, rcond=None)
    residual = float(np.linalg.norm(a_scaled @ x - b_scaled))
    return x, residual
