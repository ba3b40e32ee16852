"""Affine normal form of a solvable pair and the conic with 3+3 contact.

At an envelope point, an affine change of coordinates puts the pair at
(0, 0, +-1), the envelope point on the x-axis, the tangent intersection along
the y-directions and both patches in Monge form with no mixed xy terms.  In
those coordinates the envelope point is the center of a conic meeting both
patches with contact of order at least 3; this module constructs the map, the
Monge coefficients, the plane sections and the conic, and verifies the
contact order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import AffineMap
from .envelope import EnvelopeSolution
from .jets import Jet, compose
from .surfaces import AffineSubspace, GeometryError, Surface, SurfaceJet, fix_sign, surface_jet


class NormalFormError(GeometryError):
    """The normalizing affine map could not be built."""


def normal_form_surfaces(p: float, epsilon: int, a: float, b: float,
                         third1=(0.0, 0.0, 0.0, 0.0), third2=(0.0, 0.0, 0.0, 0.0),
                         delta: float = 1.0, half_width: float = 0.3,
                         ) -> tuple[Surface, Surface]:
    """Build a surface pair directly in normal form.  For delta = 1 the pair
    at parameters (0,0),(0,0) is an exact envelope configuration with envelope
    point (p, 0, 0); requires epsilon * p < 0 and a, b, p^2 + epsilon != 0."""
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    if epsilon * p >= 0:
        raise ValueError("need epsilon * p < 0")
    from .jets import Var

    u, v = Var("u"), Var("v")
    lead = (p * p + epsilon) / 2.0
    a0, a1, a2, a3 = (float(x) for x in third1)
    b0, b1, b2, b3 = (float(x) for x in third2)
    f1 = (1.0 + (epsilon * p) * u - lead * u**2 + float(a) * v**2
          + a0 * u**3 + a1 * u**2 * v + a2 * u * v**2 + a3 * v**3)
    f2 = (-1.0 - (epsilon * p) * u + (delta * lead) * u**2 + float(b) * v**2
          + b0 * u**3 + b1 * u**2 * v + b2 * u * v**2 + b3 * v**3)
    domain = [(-half_width, half_width), (-half_width, half_width)]
    return (Surface.graph(f1, ["u", "v"], domain),
            Surface.graph(f2, ["u", "v"], domain))


class SectionError(GeometryError):
    """The plane fails to cut the surface in a regular curve at the point."""


@dataclass
class NormalForm:
    """Monge data of a pair in normalizing affine coordinates.

    ``map`` sends the original configuration to: first point (0, 0, 1),
    second point (0, 0, -1), envelope point (p, 0, 0), mid-plane {z = 0},
    tangent-intersection directions along y.  ``epsilon`` is +-1 with
    epsilon * p < 0; ``delta`` is the second patch's u^2 coefficient relative
    to the first's and equals 1 at genuine envelope pairs.
    """

    map: AffineMap
    p: float
    epsilon: int
    quad1: np.ndarray    # y-quadratic table of the first patch ((N-1) x (N-1))
    quad2: np.ndarray
    third1: np.ndarray   # cubic coefficients (a0[, a1, a2, a3] for surfaces)
    third2: np.ndarray
    delta: float
    # consistency residuals (all ~0 at converged envelope pairs)
    slope_residual: float = 0.0     # mismatch of the second patch's slope vs -eps p
    u2_residual: float = 0.0        # first patch's u^2 coefficient vs -(p^2+eps)/2
    uv_coeff: float = 0.0           # largest mixed xy coefficient after the map
    y_slope: float = 0.0            # largest tangent-plane slope along y after the map

    @property
    def a(self) -> float:
        return float(self.quad1[0, 0]) if self.quad1.size else 0.0

    @property
    def b(self) -> float:
        return float(self.quad2[0, 0]) if self.quad2.size else 0.0


def _ambient_jets(surface: Surface, params, order: int) -> list[Jet]:
    j = surface_jet(surface, params, order=order)
    return list(j.component_jets)


def _apply_affine_to_jets(mapping: AffineMap, jets: list[Jet]) -> list[Jet]:
    out = []
    for row, t in zip(mapping.linear, mapping.translation):
        acc = jets[0] * float(row[0])
        for c, j in zip(row[1:], jets[1:]):
            if c != 0.0:
                acc = acc + j * float(c)
        acc.coeffs[0] += t
        out.append(acc)
    return out


def _invert_horizontal(jets_h: list[Jet], order: int) -> list[Jet]:
    """Invert the parameter->horizontal-coordinate jet map (zero constant
    terms) by simplified Newton in the truncated polynomial ring."""
    n = len(jets_h)
    lin = np.array([
        [j.taylor(tuple(1 if q == i else 0 for q in range(n))) for i in range(n)]
        for j in jets_h
    ])
    det = np.linalg.det(lin)
    if abs(det) <= 1e-12 * max(np.linalg.norm(lin) ** n, 1e-300):
        raise NormalFormError("image patch is not graph-representable (vertical tangent)")
    lin_inv = np.linalg.inv(lin)
    new_vars = Jet.variables([0.0] * n, order)
    current = [sum((lin_inv[i, k] * new_vars[k] for k in range(n)),
                   Jet.constant(0.0, n, order)) for i in range(n)]
    for _ in range(order):
        images = [compose(jh, current) for jh in jets_h]
        corrections = [new_vars[k] - images[k] for k in range(n)]
        current = [
            current[i] + sum((lin_inv[i, k] * corrections[k] for k in range(n)),
                             Jet.constant(0.0, n, order))
            for i in range(n)
        ]
    return current


def _graph_coefficients(jets: list[Jet], order: int) -> Jet:
    """Re-expand a parametric patch (jets of its components) as a graph
    z = g(horizontal coords) about the jet's base point."""
    n = len(jets) - 1
    horiz = []
    for j in jets[:n]:
        jj = Jet(j.space, j.coeffs.copy())
        jj.coeffs[0] = 0.0
        horiz.append(jj)
    inverse = _invert_horizontal(horiz, order)
    return compose(jets[n], inverse)


def normal_form(sol: EnvelopeSolution) -> NormalForm:
    """Construct the normalizing affine map of a converged solution and
    extract the Monge coefficients of both patches in its coordinates."""
    pc = sol.pair
    n = pc.dim
    m = n + 1
    x_rel = sol.point - pc.mid_point
    cols = [x_rel, *pc.z_space.directions, pc.mid_chord]
    basis = np.column_stack(cols)
    if abs(np.linalg.det(basis)) <= 1e-12 * max(
        np.prod([np.linalg.norm(c) for c in cols]), 1e-300
    ):
        raise NormalFormError(
            "envelope direction, chord and tangent intersection are dependent"
        )
    lin = np.linalg.inv(basis)
    y1_image = lin @ pc.y1
    if abs(y1_image[0]) <= 1e-12 * np.linalg.norm(y1_image):
        raise NormalFormError("first tangent direction maps onto the z-axis")
    slope1 = y1_image[-1] / y1_image[0]
    if abs(slope1) <= 1e-14:
        raise NormalFormError("flat tangent slope; scale normalization undefined")
    epsilon = 1 if slope1 > 0 else -1
    sigma = -epsilon * float(np.sqrt(abs(slope1)))
    scaling = np.eye(m)
    scaling[0, 0] = sigma
    full_lin = scaling @ lin
    mapping = AffineMap(full_lin, -full_lin @ pc.mid_point)
    p = sigma  # the x-image of the envelope point

    order = 3
    g1 = _graph_coefficients(
        _apply_affine_to_jets(mapping, _ambient_jets(pc.surface1, pc.params1, order)), order
    )
    g2 = _graph_coefficients(
        _apply_affine_to_jets(mapping, _ambient_jets(pc.surface2, pc.params2, order)), order
    )

    def unit(i):
        return tuple(1 if q == i else 0 for q in range(n))

    quad1 = np.empty((n - 1, n - 1))
    quad2 = np.empty((n - 1, n - 1))
    for i in range(1, n):
        for k in range(1, n):
            alpha = tuple(
                (1 if q == i else 0) + (1 if q == k else 0) for q in range(n)
            )
            quad1[i - 1, k - 1] = g1.taylor(alpha)
            quad2[i - 1, k - 1] = g2.taylor(alpha)

    if n == 2:
        third1 = np.array([g1.taylor((3, 0)), g1.taylor((2, 1)),
                           g1.taylor((1, 2)), g1.taylor((0, 3))])
        third2 = np.array([g2.taylor((3, 0)), g2.taylor((2, 1)),
                           g2.taylor((1, 2)), g2.taylor((0, 3))])
        uv_coeff = max(abs(g1.taylor((1, 1))), abs(g2.taylor((1, 1))))
        y_slope = max(abs(g1.taylor(unit(1))), abs(g2.taylor(unit(1))))
    else:
        third1 = np.array([g1.taylor((3,))])
        third2 = np.array([g2.taylor((3,))])
        uv_coeff = 0.0
        y_slope = 0.0

    u2_coeff_1 = g1.taylor((2,) + (0,) * (n - 1))
    u2_coeff_2 = g2.taylor((2,) + (0,) * (n - 1))
    delta = float(u2_coeff_2 * 2.0 / (p * p + epsilon))
    u2_residual = abs(u2_coeff_1 + (p * p + epsilon) / 2.0)
    slope_residual = abs(g2.taylor(unit(0)) + epsilon * p)

    return NormalForm(
        map=mapping, p=float(p), epsilon=epsilon,
        quad1=quad1, quad2=quad2, third1=third1, third2=third2,
        delta=delta, slope_residual=float(slope_residual),
        u2_residual=float(u2_residual), uv_coeff=float(uv_coeff),
        y_slope=float(y_slope),
    )


@dataclass
class SectionJet:
    """One-parameter jet of the curve cut out of a patch by a plane."""

    component_jets: tuple[Jet, ...]
    param_jets: tuple[Jet, ...]  # the patch parameters as functions of t

    def derivative(self, k: int) -> np.ndarray:
        import math

        return np.array([j.taylor((k,)) * math.factorial(k) for j in self.component_jets])

    @property
    def point(self) -> np.ndarray:
        return np.array([j.value for j in self.component_jets])


def _section_from_normal(j: SurfaceJet, normal: np.ndarray, order: int) -> SectionJet:
    """Parameterize {psi(q) : normal . (psi(q) - psi(q0)) = 0} near q0 by one
    parameter, solving the constraint order by order in the jet ring."""
    n = j.dim
    jets = list(j.component_jets)
    if n == 1:
        t = Jet.variables([0.0], order)[0]
        return SectionJet(tuple(jets), (t,))
    g = jets[0] * float(normal[0])
    for c, jj in zip(normal[1:], jets[1:]):
        g = g + jj * float(c)
    g.coeffs[0] = 0.0  # the base point satisfies the constraint by construction
    grad = np.array([g.taylor(tuple(1 if q == i else 0 for q in range(n))) for i in range(n)])
    scale = max(np.linalg.norm(normal) * float(np.max(np.linalg.norm(j.tangents, axis=1))), 1e-300)
    if np.linalg.norm(grad) <= 1e-10 * scale:
        raise SectionError("plane is tangent to the surface at the point")
    dependent = int(np.argmax(np.abs(grad)))
    free = 1 - dependent  # n == 2 here
    t = Jet.variables([0.0], order)[0]
    zero = Jet.constant(0.0, 1, order)
    sol = [zero, zero]
    sol[free] = t
    for _ in range(order + 1):
        residual = compose(g, sol)
        sol[dependent] = sol[dependent] - residual * (1.0 / grad[dependent])
    curves = tuple(compose(jj, sol) for jj in jets)
    return SectionJet(curves, tuple(sol))


def planar_section_jet(surface: Surface, params, plane: AffineSubspace,
                       order: int = 3) -> SectionJet:
    """Jet of the curve in which a plane (base point + 2 directions) cuts the
    patch near the given parameter point.  The plane must pass through the
    surface point and not be tangent there."""
    j = surface_jet(surface, params, order=order)
    if surface.dim == 1:
        return _section_from_normal(j, np.zeros(2), order)
    d1, d2 = plane.directions
    normal = np.cross(d1, d2)
    off = (j.position - plane.base_point) @ normal / max(np.linalg.norm(normal), 1e-300)
    if abs(off) > 1e-8 * max(1.0, np.linalg.norm(j.position - plane.base_point)):
        raise SectionError("plane does not pass through the surface point")
    return _section_from_normal(j, normal, order)


@dataclass
class Conic:
    """A planar conic fitted with 3+3 contact, in in-plane coordinates.

    ``coefficients`` are (c1, c2, c3, c4, c5, c6) of
    c1 w1^2 + c2 w1 w2 + c3 w2^2 + c4 w1 + c5 w2 + c6, unit-normalized with
    the first significant coefficient positive.
    """

    plane_origin: np.ndarray
    plane_basis: np.ndarray       # (2, N+1) orthonormal rows
    coefficients: np.ndarray
    center_plane: np.ndarray | None
    center: np.ndarray | None
    conic_class: str              # "ellipse" | "hyperbola" | "degenerate"
    contact_det: float            # determinant of the 6x6 contact system
    nullspace_dim: int
    singular_values: np.ndarray
    third_derivatives: np.ndarray  # d^3/dt^3 of conic o section at each endpoint
    fit_residual: float


def contact_conic(sol: EnvelopeSolution, order: int = 3,
                  nullspace_tolerance: float = 1e-8) -> Conic:
    """Fit the conic in the plane spanned by Y1, Y2 through the first point
    that meets both patch sections with contact of order >= 3.

    Builds the 6x6 homogeneous system of vanishing derivative orders 0..2 of
    (conic o section) at both points; the conic is its null direction.  The
    determinant of the system is a secondary envelope-membership oracle, and
    the third derivatives report whether each contact is exactly 3.
    """
    pc = sol.pair
    e1 = fix_sign(pc.y1 / np.linalg.norm(pc.y1))
    y2_perp = pc.y2 - (pc.y2 @ e1) * e1
    norm2 = np.linalg.norm(y2_perp)
    if norm2 <= 1e-12 * np.linalg.norm(pc.y2):
        raise NormalFormError("Y1 and Y2 are parallel; contact plane undefined")
    e2 = fix_sign(y2_perp / norm2)
    basis = np.vstack([e1, e2])
    origin = pc.jet1.position

    if pc.dim == 1:
        normal = None
    else:
        normal = np.cross(e1, e2)

    j1 = surface_jet(pc.surface1, pc.params1, order=order)
    j2 = surface_jet(pc.surface2, pc.params2, order=order)
    rows = []
    w_jets_per_point = []
    for j in (j1, j2):
        if pc.dim == 1:
            section = _section_from_normal(j, np.zeros(2), order)
        else:
            section = _section_from_normal(j, normal, order)
        deltas = []
        for comp, o in zip(section.component_jets, origin):
            dj = Jet(comp.space, comp.coeffs.copy())
            dj.coeffs[0] -= o
            deltas.append(dj)
        w1 = sum((deltas[k] * float(basis[0, k]) for k in range(len(deltas))),
                 Jet.constant(0.0, 1, order))
        w2 = sum((deltas[k] * float(basis[1, k]) for k in range(len(deltas))),
                 Jet.constant(0.0, 1, order))
        w_jets_per_point.append((w1, w2))
        one = Jet.constant(1.0, 1, order)
        monomials = (w1 * w1, w1 * w2, w2 * w2, w1, w2, one)
        for k in range(3):
            rows.append([mn.taylor((k,)) for mn in monomials])

    a = np.array(rows)
    u, s, vh = np.linalg.svd(a)
    nullspace_dim = int(np.sum(s <= nullspace_tolerance * s[0]))
    coeffs = fix_sign(vh[-1])
    fit_residual = float(np.linalg.norm(a @ coeffs))
    contact_det = float(np.linalg.det(a))

    c1, c2, c3, c4, c5, c6 = coeffs
    disc = c2 * c2 - 4.0 * c1 * c3
    quad_scale = c1 * c1 + c2 * c2 + c3 * c3
    if disc < -1e-10 * quad_scale:
        conic_class = "ellipse"
    elif disc > 1e-10 * quad_scale:
        conic_class = "hyperbola"
    else:
        conic_class = "degenerate"

    gram = np.array([[2 * c1, c2], [c2, 2 * c3]])
    center_plane = None
    center = None
    if abs(np.linalg.det(gram)) > 1e-12 * max(quad_scale, 1e-300):
        center_plane = np.linalg.solve(gram, -np.array([c4, c5]))
        center = origin + basis.T @ center_plane

    thirds = []
    for w1, w2 in w_jets_per_point:
        q = w1 * w1 * c1 + w1 * w2 * c2 + w2 * w2 * c3 + w1 * c4 + w2 * c5 + c6
        thirds.append(q.taylor((3,)) * 6.0)

    return Conic(
        plane_origin=origin, plane_basis=basis, coefficients=coeffs,
        center_plane=center_plane, center=center, conic_class=conic_class,
        contact_det=contact_det, nullspace_dim=nullspace_dim,
        singular_values=s, third_derivatives=np.array(thirds),
        fit_residual=fit_residual,
    )
