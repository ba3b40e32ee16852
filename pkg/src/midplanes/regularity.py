"""Smoothness diagnostics of the envelope via the second-derivative block.

The mid-plane function F of the pair family, with the ambient point frozen at
the envelope point, has a 2N x 2N matrix of second parameter derivatives.  A
nonzero determinant of that block is a sufficient condition for the envelope
to be a smooth hypersurface near the point.  For surface pairs in normal form
the block has a closed form, with factorizations in two special cases: a
shared 3+3 quadric (a + b = 0) and vanishing mixed cubic coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conics import Conic, NormalForm
from .envelope import EnvelopeSolution, midplane_values_batch


def _hessian_stencil(q0: np.ndarray, steps: np.ndarray) -> list[np.ndarray]:
    """Evaluation points of the central second-difference stencil: center,
    axis pairs, then the four corners of every (i, j) plane, i < j."""
    n = q0.size
    points = [q0]
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        points.extend([q0 + ei, q0 - ei])
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            points.extend([q0 + ei + ej, q0 + ei - ej, q0 - ei + ej, q0 - ei - ej])
    return points


def _hessian_from_values(vals: np.ndarray, steps: np.ndarray, n: int) -> np.ndarray:
    out = np.empty((n, n))
    f0 = vals[0]
    pos = 1
    for i in range(n):
        out[i, i] = (vals[pos] - 2.0 * f0 + vals[pos + 1]) / steps[i] ** 2
        pos += 2
    for i in range(n):
        for j in range(i + 1, n):
            val = (vals[pos] - vals[pos + 1] - vals[pos + 2] + vals[pos + 3]) / (
                4.0 * steps[i] * steps[j]
            )
            out[i, j] = val
            out[j, i] = val
            pos += 4
    return out


def jg1_numeric(sol: EnvelopeSolution, step_scale: float = 1e-4) -> np.ndarray:
    """Second parameter-derivative block of the mid-plane function at the
    solution, ambient point fixed: central differences with step
    ``step_scale`` times the per-parameter domain size, Richardson-extrapolated
    once.  F itself is evaluated from exact jets, so only the outer difference
    is approximate."""
    pc = sol.pair
    n = pc.dim
    x = sol.point
    s1, s2 = pc.surface1, pc.surface2
    q0 = np.concatenate([pc.params1, pc.params2])
    steps = step_scale * np.concatenate([s1.domain_scale(), s2.domain_scale()])

    points = _hessian_stencil(q0, steps) + _hessian_stencil(q0, steps / 2.0)
    batch = np.array(points)
    vals = midplane_values_batch(s1, batch[:, :n], s2, batch[:, n:], x)
    half = len(points) // 2
    coarse = _hessian_from_values(vals[:half], steps, 2 * n)
    fine = _hessian_from_values(vals[half:], steps / 2.0, 2 * n)
    return (4.0 * fine - coarse) / 3.0


def delta(sol: EnvelopeSolution, threshold: float = 1e-4) -> tuple[float, bool]:
    """Determinant of the second-derivative block and the smoothness verdict.

    The flag is a sufficient condition only: True means the envelope is smooth
    at the point; False is inconclusive."""
    jg1 = jg1_numeric(sol)
    det = float(np.linalg.det(jg1))
    sigma_max = float(np.linalg.norm(jg1, ord=2))
    smooth = abs(det) > threshold * sigma_max ** jg1.shape[0]
    return det, smooth


def jg1_closed_form(nf: NormalForm) -> np.ndarray:
    """The closed-form 4x4 block for surface pairs in normal form, in the
    epsilon = +1 convention (see :func:`jg1_closed_form_general` for both
    signs)."""
    p = nf.p
    a, b = nf.a, nf.b
    a0, a1, a2, _ = nf.third1
    b0, b1, b2, _ = nf.third2
    return np.array([
        [3 * p**2 + 3 * p**4 - 6 * p * a0, -2 * p * a1, 0.0, 0.0],
        [-2 * p * a1, -2 * a * p**2 - 2 * a2 * p, 0.0, (a + b) * (p**2 + 1)],
        [0.0, 0.0, -3 * p**4 - 3 * p**2 - 6 * p * b0, -2 * p * b1],
        [0.0, (a + b) * (p**2 + 1), -2 * p * b1, -2 * b * p**2 - 2 * b2 * p],
    ])


def jg1_closed_form_general(nf: NormalForm) -> np.ndarray:
    """The closed-form block valid for both signs of epsilon: relative to the
    printed matrix, p^4 -> eps p^4, a p^2 -> a eps p^2 and (p^2+1) ->
    (eps p^2 + 1).  Agrees with :func:`jg1_closed_form` when epsilon = +1."""
    p = nf.p
    e = float(nf.epsilon)
    a, b = nf.a, nf.b
    a0, a1, a2, _ = nf.third1
    b0, b1, b2, _ = nf.third2
    return np.array([
        [3 * p**2 + 3 * e * p**4 - 6 * p * a0, -2 * p * a1, 0.0, 0.0],
        [-2 * p * a1, -2 * a * e * p**2 - 2 * a2 * p, 0.0, (a + b) * (e * p**2 + 1)],
        [0.0, 0.0, -3 * e * p**4 - 3 * p**2 - 6 * p * b0, -2 * p * b1],
        [0.0, (a + b) * (e * p**2 + 1), -2 * p * b1, -2 * b * e * p**2 - 2 * b2 * p],
    ])


@dataclass
class SpecialCaseReport:
    """Factorization diagnostics of the closed-form block.

    ``delta1_*``/``delta2_*`` evaluate the 2x2 corner determinants with the
    two cubic-coefficient choices that appear in print (the uv^2 coefficient
    versus the v^3 coefficient); the numeric block decides which one is
    meaningful.  ``factored_delta`` is filled when the mixed cubic
    coefficients vanish.
    """

    a_plus_b: float
    quadric_case: bool            # a + b = 0: a quadric has 3+3 contact
    delta1_uvv: float             # top-left 2x2 det using the u v^2 coefficient
    delta1_vvv: float             # same with the v^3 coefficient instead
    delta2_uvv: float
    delta2_vvv: float
    prefactor1: float             # 3p^2 + 3p^4 - 6p a0
    prefactor2: float             # -3p^4 - 3p^2 - 6p b0
    factored_delta: float | None  # prefactor1 * prefactor2 * delta_quad
    delta_quad: float | None      # -((a-b)^2 p^4 + (a+b)^2 + 2p^2 (a+b)^2)
    mixed_cubics_vanish: bool
    contact_exactly_3: tuple[bool, bool] | None
    numeric_delta: float | None
    verdict_consistent: bool | None


def special_case_report(nf: NormalForm, conic: Conic | None = None,
                        numeric_delta: float | None = None,
                        tol: float = 1e-8) -> SpecialCaseReport:
    """Interpret the closed-form block of a surface pair in normal form:
    quadric 3+3 contact when a + b = 0, corner-determinant factors (in both
    printed symbol variants), the fully factored determinant when the mixed
    cubic coefficients vanish, and exactness of the conic contacts."""
    if nf.third1.size != 4:
        raise ValueError("special-case analysis applies to surface pairs only")
    p = nf.p
    a, b = nf.a, nf.b
    a0, a1, a2, a3 = nf.third1
    b0, b1, b2, b3 = nf.third2
    scale = abs(a) + abs(b) + 1.0
    quadric_case = abs(a + b) <= tol * scale

    pre1 = 3 * p**2 + 3 * p**4 - 6 * p * a0
    pre2 = -3 * p**4 - 3 * p**2 - 6 * p * b0
    d1_uvv = pre1 * (-2 * a * p**2 - 2 * a2 * p) - (2 * p * a1) ** 2
    d1_vvv = pre1 * (-2 * a * p**2 - 2 * a3 * p) - (2 * p * a1) ** 2
    d2_uvv = pre2 * (-2 * b * p**2 - 2 * b2 * p) - (2 * p * b1) ** 2
    d2_vvv = pre2 * (-2 * b * p**2 - 2 * b3 * p) - (2 * p * b1) ** 2

    cubic_scale = max(abs(a1), abs(a2), abs(b1), abs(b2), 1.0)
    mixed_vanish = max(abs(a1), abs(a2), abs(b1), abs(b2)) <= tol * cubic_scale and \
        max(abs(a1), abs(a2), abs(b1), abs(b2)) <= 1e-6
    factored = None
    delta_quad = None
    if mixed_vanish:
        delta_quad = -((a - b) ** 2 * p**4 + (a + b) ** 2 + 2 * p**2 * (a + b) ** 2)
        factored = pre1 * pre2 * delta_quad

    contact_flags = None
    if conic is not None:
        coeff_scale = float(np.linalg.norm(conic.coefficients))
        contact_flags = tuple(
            bool(abs(t) > 1e-6 * coeff_scale) for t in conic.third_derivatives
        )

    consistent = None
    if numeric_delta is not None and factored is not None:
        ref = max(abs(numeric_delta), abs(factored), 1e-12)
        consistent = abs(numeric_delta - factored) <= 1e-3 * ref

    return SpecialCaseReport(
        a_plus_b=float(a + b), quadric_case=quadric_case,
        delta1_uvv=float(d1_uvv), delta1_vvv=float(d1_vvv),
        delta2_uvv=float(d2_uvv), delta2_vvv=float(d2_vvv),
        prefactor1=float(pre1), prefactor2=float(pre2),
        factored_delta=None if factored is None else float(factored),
        delta_quad=None if delta_quad is None else float(delta_quad),
        mixed_cubics_vanish=mixed_vanish,
        contact_exactly_3=contact_flags,
        numeric_delta=numeric_delta,
        verdict_consistent=consistent,
    )


@dataclass
class RegularityReport:
    jg1: np.ndarray
    delta: float
    smooth: bool
    closed_form: np.ndarray | None
    special: SpecialCaseReport | None


def regularity_report(sol: EnvelopeSolution, nf: NormalForm | None = None,
                      conic: Conic | None = None) -> RegularityReport:
    """Numeric block and determinant, plus closed-form validators when a
    normal form is supplied (surface pairs only)."""
    jg1 = jg1_numeric(sol)
    det = float(np.linalg.det(jg1))
    sigma_max = float(np.linalg.norm(jg1, ord=2))
    smooth = abs(det) > 1e-4 * sigma_max ** jg1.shape[0]
    closed = None
    special = None
    if nf is not None and sol.pair.dim == 2:
        closed = jg1_closed_form(nf)
        special = special_case_report(nf, conic=conic, numeric_delta=det)
    return RegularityReport(jg1, det, smooth, closed, special)
