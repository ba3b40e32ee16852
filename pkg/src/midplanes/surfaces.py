"""Hypersurface patches in (N+1)-space and their affine frame data.

A patch is either the graph of a scalar function or a parametric immersion.
From its 2-jet we derive the working transversal frame: the conormal (the
covector annihilating the tangent space and taking value 1 on the chosen
transversal field), the induced symmetric bilinear form h, the Blaschke
rescaling, tangent-space intersections of pairs, and h-orthogonal directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .jets import Const, Expression, Jet, Node, Var, eval_jet, expression


class GeometryError(ValueError):
    """Base class for frame and intersection failures."""


class ImmersionError(GeometryError):
    """Tangent vectors are linearly dependent at the evaluation point."""


class DegenerateMetricError(GeometryError):
    """The induced bilinear form h is singular where it must not be."""


class TransversalityError(GeometryError):
    """Tangent spaces are parallel or nearly so."""


@dataclass(frozen=True)
class Surface:
    """A hypersurface patch of dimension ``dim`` in (dim+1)-space.

    ``graph`` patches store the single height function; ``parametric`` patches
    store all dim+1 component functions over the parameters.
    """

    kind: str  # "graph" | "parametric"
    components: tuple[Expression, ...]
    variables: tuple[str, ...]
    domain: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.kind not in ("graph", "parametric"):
            raise ValueError(f"kind must be 'graph' or 'parametric', got {self.kind!r}")
        n = len(self.variables)
        expected = 1 if self.kind == "graph" else n + 1
        if len(self.components) != expected:
            raise ValueError(
                f"{self.kind} surface over {n} variables needs {expected} "
                f"component(s), got {len(self.components)}"
            )
        if len(self.domain) != n:
            raise ValueError("domain must provide one (lo, hi) range per variable")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError(f"empty domain range ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    @staticmethod
    def graph(f: str | Node | Expression, variables: Sequence[str],
              domain: Sequence[tuple[float, float]]) -> "Surface":
        expr = f if isinstance(f, Expression) else expression(f, variables)
        return Surface("graph", (expr,), tuple(variables), tuple(map(tuple, domain)))

    @staticmethod
    def parametric(components: Sequence[str | Node | Expression], variables: Sequence[str],
                   domain: Sequence[tuple[float, float]]) -> "Surface":
        exprs = tuple(
            c if isinstance(c, Expression) else expression(c, variables) for c in components
        )
        return Surface("parametric", exprs, tuple(variables), tuple(map(tuple, domain)))

    def position_nodes(self) -> tuple[Node, ...]:
        """Syntax trees of the immersion components (graph -> (vars..., f))."""
        if self.kind == "graph":
            return tuple(Var(v) for v in self.variables) + (self.components[0].root,)
        return tuple(c.root for c in self.components)

    def transformed(self, affine) -> "Surface":
        """The image surface under an invertible affine map, as a parametric
        patch over the same parameters."""
        nodes = self.position_nodes()
        lin = np.asarray(affine.linear, dtype=float)
        trans = np.asarray(affine.translation, dtype=float)
        new_components = []
        for row, t in zip(lin, trans):
            node: Node = Const(float(t))
            for c, comp in zip(row, nodes):
                if c != 0.0:
                    node = node + Const(float(c)) * comp
            new_components.append(expression(node, self.variables))
        return Surface("parametric", tuple(new_components), self.variables, self.domain)

    def contains(self, params: np.ndarray, margin: float = 0.0) -> bool:
        return all(
            lo - margin <= x <= hi + margin for x, (lo, hi) in zip(params, self.domain)
        )

    def domain_scale(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.domain])


@dataclass
class SurfaceJet:
    """Position and derivative vectors of the immersion at one parameter point."""

    surface: Surface
    params: np.ndarray
    order: int
    position: np.ndarray          # (N+1,)
    tangents: np.ndarray          # (N, N+1), row i = d psi / d x_i
    second: np.ndarray | None     # (N, N, N+1), symmetric in the first two axes
    third: np.ndarray | None      # (N, N, N, N+1), symmetric
    component_jets: tuple[Jet, ...]

    @property
    def dim(self) -> int:
        return self.surface.dim


def surface_jet(surface: Surface, params: Sequence[float], order: int = 2) -> SurfaceJet:
    """Evaluate the immersion with derivatives up to ``order`` (<= 4).

    Raises :class:`ImmersionError` if the tangent vectors are dependent at the
    point, and propagates domain errors from the formula evaluation.
    """
    params = np.asarray(params, dtype=float)
    n = surface.dim
    m = n + 1
    if params.shape != (n,):
        raise ValueError(f"expected {n} parameters, got shape {params.shape}")
    if surface.kind == "graph":
        f = eval_jet(surface.components[0], params, order=order)
        jets: list[Jet] = list(Jet.variables(params, order)) + [f]
    else:
        jets = [eval_jet(c, params, order=order) for c in surface.components]

    position = np.array([j.value for j in jets])
    tangents = None
    second = None
    third = None
    if order >= 1:
        tangents = np.empty((n, m))
        for i in range(n):
            alpha = tuple(1 if k == i else 0 for k in range(n))
            tangents[i] = [j.partial(alpha) for j in jets]
    if order >= 2:
        second = np.empty((n, n, m))
        for i in range(n):
            for k in range(i, n):
                alpha = tuple((1 if q == i else 0) + (1 if q == k else 0) for q in range(n))
                vec = np.array([j.partial(alpha) for j in jets])
                second[i, k] = vec
                second[k, i] = vec
    if order >= 3:
        third = np.empty((n, n, n, m))
        for i in range(n):
            for k in range(n):
                for l in range(n):
                    alpha = tuple(
                        (1 if q == i else 0) + (1 if q == k else 0) + (1 if q == l else 0)
                        for q in range(n)
                    )
                    third[i, k, l] = [j.partial(alpha) for j in jets]

    if order >= 1:
        sv = np.linalg.svd(tangents, compute_uv=False)
        if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
            raise ImmersionError(
                f"tangent vectors are rank deficient at params {params.tolist()}"
            )
    return SurfaceJet(surface, params, order, position, tangents, second, third, tuple(jets))


@dataclass
class TransversalFrame:
    """Conormal, transversal field value and induced metric at a point.

    Invariants: conormal(tangent) = 0, conormal(transversal) = 1 and
    metric[i, j] = conormal(psi_{x_i x_j}).
    """

    conormal: np.ndarray     # (N+1,)
    transversal: np.ndarray  # (N+1,)
    metric: np.ndarray       # (N, N)
    degenerate: bool


def conormal_covector(tangents: np.ndarray) -> np.ndarray:
    """Generalized cross product: the covector X -> det[t_1, ..., t_N, X]."""
    n, m = tangents.shape
    if n == 1:
        t = tangents[0]
        return np.array([-t[1], t[0]])
    if n == 2:
        return np.cross(tangents[0], tangents[1])
    out = np.empty(m)
    for k in range(m):
        minor = np.delete(tangents, k, axis=1)
        out[k] = (-1.0) ** (n + k) * np.linalg.det(minor)
    return out


def _metric_degenerate(h: np.ndarray) -> bool:
    scale = np.max(np.abs(h))
    if scale == 0.0:
        return True
    n = h.shape[0]
    return bool(abs(np.linalg.det(h)) <= 1e-12 * scale**n)


def transversal_frame(j: SurfaceJet) -> TransversalFrame:
    """Working frame of the patch at the evaluated point.

    Graphs use the last coordinate direction as transversal field, so the
    conormal is (-grad f, 1) and the metric is the Hessian of f.  Parametric
    patches use the cross-product conormal with transversal = conormal
    (sharp) / |conormal|^2, so conormal(transversal) = 1.
    """
    n = j.dim
    if j.second is None:
        raise ValueError("transversal_frame needs a jet of order >= 2")
    if j.surface.kind == "graph":
        grad = j.tangents[:, -1]
        nu = np.concatenate([-grad, [1.0]])
        xi = np.zeros(n + 1)
        xi[-1] = 1.0
        h = j.second[:, :, -1].copy()
    else:
        nu = conormal_covector(j.tangents)
        norm2 = float(nu @ nu)
        if norm2 <= 0.0:
            raise ImmersionError("degenerate tangent frame")
        xi = nu / norm2
        h = np.einsum("ijk,k->ij", j.second, nu)
    return TransversalFrame(nu, xi, h, _metric_degenerate(h))


def blaschke_rescale(frame: TransversalFrame, n_dim: int) -> TransversalFrame:
    """Equiaffine rescaling of the frame: metric and conormal divide by
    |det h|^(1/(N+2)) and the transversal multiplies by it, preserving the
    conormal identities and the induced-volume condition."""
    det = float(np.linalg.det(frame.metric))
    if frame.degenerate or det == 0.0:
        raise DegenerateMetricError("Blaschke rescaling needs a nonsingular metric")
    phi = abs(det) ** (1.0 / (n_dim + 2))
    return TransversalFrame(
        conormal=frame.conormal / phi,
        transversal=frame.transversal * phi,
        metric=frame.metric / phi,
        degenerate=False,
    )


@dataclass
class AffineSubspace:
    """An affine subspace given by a base point and a direction basis."""

    base_point: np.ndarray
    directions: np.ndarray  # (k, N+1); k may be 0

    @property
    def dim(self) -> int:
        return self.directions.shape[0]

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the direction span."""
        if self.directions.shape[0] == 0:
            return np.zeros((self.base_point.size, self.base_point.size))
        q, _ = np.linalg.qr(self.directions.T)
        return q @ q.T


def fix_sign(v: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Flip the vector so its first entry of significant magnitude is positive."""
    threshold = tol if tol > 0 else 1e-14 * max(float(np.max(np.abs(v))), 1e-300)
    for x in v:
        if abs(x) > threshold:
            return v if x > 0 else -v
    return v


def transversality_sine(nu1: np.ndarray, nu2: np.ndarray) -> float:
    """Sine of the angle between the conormal directions (0 = parallel)."""
    n1 = float(nu1 @ nu1)
    n2 = float(nu2 @ nu2)
    dot = float(nu1 @ nu2)
    s2 = max(n1 * n2 - dot * dot, 0.0) / (n1 * n2)
    return float(np.sqrt(s2))


def tangent_intersection(j1: SurfaceJet, j2: SurfaceJet,
                         min_transversality: float = 1e-6) -> AffineSubspace:
    """Intersection of the two tangent hyperplanes: a codimension-2 affine
    subspace (a point for curves, a line for surfaces).

    The base point is the minimum-norm solution of the two hyperplane
    equations; the direction basis is the common kernel of both conormals,
    unit-normalized with the first significant coordinate positive.
    """
    f1 = transversal_frame(j1)
    f2 = transversal_frame(j2)
    sine = transversality_sine(f1.conormal, f2.conormal)
    if sine < min_transversality:
        raise TransversalityError(
            f"tangent spaces nearly parallel (sine of angle {sine:.3e})"
        )
    rows = np.vstack([f1.conormal, f2.conormal])
    rhs = np.array([f1.conormal @ j1.position, f2.conormal @ j2.position])
    base, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    _, s, vh = np.linalg.svd(rows)
    null = vh[2:]
    directions = np.array([fix_sign(v / np.linalg.norm(v)) for v in null]).reshape(
        -1, j1.position.size
    )
    return AffineSubspace(base, directions)


def tangent_coordinates(j: SurfaceJet, vector: np.ndarray,
                        tol: float = 1e-8) -> np.ndarray:
    """Coordinates of an ambient vector in the tangent basis psi_{x_i}.

    Raises :class:`GeometryError` when the vector is not tangent to the patch
    at the point (relative residual above ``tol``)."""
    coeffs, *_ = np.linalg.lstsq(j.tangents.T, vector, rcond=None)
    residual = j.tangents.T @ coeffs - vector
    scale = max(float(np.linalg.norm(vector)), 1e-300)
    if np.linalg.norm(residual) > tol * scale:
        raise GeometryError("vector is not tangent to the surface at the point")
    return coeffs


def h_orthogonal_param(j: SurfaceJet, frame: TransversalFrame,
                       z: AffineSubspace) -> np.ndarray:
    """Parameter-space coordinates of a tangent direction h-orthogonal to the
    Z directions, unit-normalized in parameter coordinates with the first
    significant coefficient positive."""
    n = j.dim
    if frame.degenerate:
        raise DegenerateMetricError("h is degenerate; no h-orthogonal direction")
    if n == 1:
        return np.array([1.0])
    z_params = np.array([tangent_coordinates(j, d) for d in z.directions])
    rows = z_params @ frame.metric  # h(Y, Z_k) = 0  <=>  rows @ Y = 0
    if np.linalg.norm(rows) <= 1e-14 * max(float(np.max(np.abs(frame.metric))), 1e-300):
        raise DegenerateMetricError("metric annihilates the Z directions")
    _, _, vh = np.linalg.svd(rows)
    y = vh[-1]
    y = y / np.linalg.norm(y)
    return fix_sign(y)


def h_orthogonal_direction(j: SurfaceJet, frame: TransversalFrame,
                           z: AffineSubspace) -> np.ndarray:
    """Ambient tangent vector h-orthogonal to every Z direction, normalized to
    unit Euclidean length with the first significant coordinate positive."""
    y_param = h_orthogonal_param(j, frame, z)
    y = j.tangents.T @ y_param
    y = y / np.linalg.norm(y)
    return fix_sign(y)
