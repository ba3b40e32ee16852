import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from midplanes.surfaces import (
    DegenerateMetricError,
    ImmersionError,
    Surface,
    TransversalityError,
    blaschke_rescale,
    h_orthogonal_direction,
    h_orthogonal_param,
    surface_jet,
    tangent_coordinates,
    tangent_intersection,
    transversal_frame,
)

F1 = Surface.graph("1 - u - u^2 + v^2", ["u", "v"], [(-0.5, 0.5), (-0.5, 0.5)])
F2 = Surface.graph("-1 + u + u^2 + v^2", ["u", "v"], [(-0.5, 0.5), (-0.5, 0.5)])


def rotational(f_of_t: str, t_range=(0.2, 0.8)) -> Surface:
    return Surface.parametric(
        [f"t*cos(theta)", f"t*sin(theta)", f_of_t],
        ["t", "theta"],
        [t_range, (0.0, 2 * np.pi)],
    )


# -- surface_jet ---------------------------------------------------------------


def test_graph_jet_hand_example():
    j = surface_jet(F1, (0.0, 0.0), order=2)
    np.testing.assert_allclose(j.position, [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(j.tangents[0], [1, 0, -1], atol=1e-15)
    np.testing.assert_allclose(j.tangents[1], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(j.second[0, 0], [0, 0, -2], atol=1e-15)
    np.testing.assert_allclose(j.second[0, 1], j.second[1, 0], atol=1e-15)


def test_parametric_jet_hand_example():
    s = rotational("t^2")
    j = surface_jet(s, (1.0, 0.0), order=2)
    np.testing.assert_allclose(j.position, [1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(j.tangents[0], [1, 0, 2], atol=1e-15)
    np.testing.assert_allclose(j.tangents[1], [0, 1, 0], atol=1e-15)


def test_order_zero_gives_position_only():
    j = surface_jet(F1, (0.1, -0.2), order=0)
    assert j.tangents is None and j.second is None and j.third is None
    np.testing.assert_allclose(j.position[:2], [0.1, -0.2])


def test_immersion_failure_detected():
    s = Surface.parametric(["t^2", "t^3"], ["t"], [(-1.0, 1.0)])
    with pytest.raises(ImmersionError):
        surface_jet(s, (0.0,), order=1)


# -- transversal_frame ---------------------------------------------------------


def test_graph_frame_hand_examples():
    fr1 = transversal_frame(surface_jet(F1, (0.0, 0.0)))
    np.testing.assert_allclose(fr1.conormal, [1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(fr1.metric, np.diag([-2.0, 2.0]), atol=1e-15)
    assert not fr1.degenerate

    fr2 = transversal_frame(surface_jet(F2, (0.0, 0.0)))
    np.testing.assert_allclose(fr2.conormal, [-1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(fr2.metric, np.diag([2.0, 2.0]), atol=1e-15)


def test_flat_graph_flagged_degenerate():
    s = Surface.graph("2.0", ["u", "v"], [(-1, 1), (-1, 1)])
    fr = transversal_frame(surface_jet(s, (0.0, 0.0)))
    assert fr.degenerate


@settings(max_examples=25, deadline=None)
@given(
    st.floats(-0.4, 0.4), st.floats(-0.4, 0.4),
    st.floats(0.3, 2.0), st.floats(0.3, 2.0), st.floats(-1.0, 1.0),
)
def test_conormal_identities_graph(u, v, a, b, c):
    s = Surface.graph(f"{a!r}*u^2 + {b!r}*v^2 + {c!r}*u*v - u", ["u", "v"],
                      [(-0.5, 0.5), (-0.5, 0.5)])
    j = surface_jet(s, (u, v))
    fr = transversal_frame(j)
    assert abs(fr.conormal @ fr.transversal - 1.0) < 1e-12
    for t in j.tangents:
        assert abs(fr.conormal @ t) < 1e-12 * np.linalg.norm(fr.conormal)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.25, 0.75), st.floats(0.0, 6.2))
def test_conormal_identities_parametric(t, theta):
    s = rotational("t^2 - 0.3*t^3")
    j = surface_jet(s, (t, theta))
    fr = transversal_frame(j)
    scale = np.linalg.norm(fr.conormal)
    assert abs(fr.conormal @ fr.transversal - 1.0) < 1e-12
    for tv in j.tangents:
        assert abs(fr.conormal @ tv) < 1e-12 * scale * np.linalg.norm(tv)
    # metric equals conormal applied to the second derivatives
    h_direct = np.einsum("ijk,k->ij", j.second, fr.conormal)
    np.testing.assert_allclose(fr.metric, h_direct, atol=1e-13 * scale)


def test_corollary_conormal_derivative_matches_metric():
    # directional derivative of p -> nu(p)(X) along a tangent direction equals
    # -h(Y, X^T), X^T the tangent part of X along the transversal
    s = Surface.graph("0.7*u^2 + 1.3*v^2 + 0.4*u*v - 0.2*u + 0.1*v^3",
                      ["u", "v"], [(-0.5, 0.5), (-0.5, 0.5)])
    q0 = np.array([0.12, -0.07])
    x_fixed = np.array([0.3, -1.1, 0.8])
    y_param = np.array([0.6, -0.8])

    def nu_at(q):
        jq = surface_jet(s, q)
        return transversal_frame(jq).conormal

    h_step = 1e-5
    g_plus = nu_at(q0 + h_step * y_param) @ x_fixed
    g_minus = nu_at(q0 - h_step * y_param) @ x_fixed
    fd = (g_plus - g_minus) / (2 * h_step)

    j = surface_jet(s, q0)
    fr = transversal_frame(j)
    lam = fr.conormal @ x_fixed
    x_tan = x_fixed - lam * fr.transversal
    c = tangent_coordinates(j, x_tan)
    expected = -(y_param @ fr.metric @ c)
    assert abs(fd - expected) < 1e-5 * max(1.0, abs(expected))


# -- blaschke_rescale ----------------------------------------------------------


def test_blaschke_rescale_example():
    fr = transversal_frame(surface_jet(F1, (0.0, 0.0)))
    res = blaschke_rescale(fr, 2)
    np.testing.assert_allclose(res.metric, np.diag([-np.sqrt(2), np.sqrt(2)]), atol=1e-14)
    # conormal identities survive the rescaling
    assert abs(res.conormal @ res.transversal - 1.0) < 1e-14
    # equiaffine condition: induced volume equals the metric volume
    j = surface_jet(F1, (0.0, 0.0))
    vol = np.linalg.det(np.vstack([j.tangents, res.transversal]))
    assert abs(abs(vol) - np.sqrt(abs(np.linalg.det(res.metric)))) < 1e-13


def test_blaschke_rescale_identity_fixed_point():
    s = Surface.graph("0.5*u^2 + 0.5*v^2", ["u", "v"], [(-1, 1), (-1, 1)])
    fr = transversal_frame(surface_jet(s, (0.0, 0.0)))
    res = blaschke_rescale(fr, 2)
    np.testing.assert_allclose(res.metric, fr.metric, atol=1e-15)
    np.testing.assert_allclose(res.conormal, fr.conormal, atol=1e-15)


def test_blaschke_rescale_rejects_singular():
    s = Surface.graph("u^2", ["u", "v"], [(-1, 1), (-1, 1)])
    fr = transversal_frame(surface_jet(s, (0.0, 0.0)))
    with pytest.raises(DegenerateMetricError):
        blaschke_rescale(fr, 2)


# -- tangent_intersection -------------------------------------------------------


def test_tangent_intersection_of_normal_form_pair():
    j1 = surface_jet(F1, (0.0, 0.0))
    j2 = surface_jet(F2, (0.0, 0.0))
    z = tangent_intersection(j1, j2)
    assert z.directions.shape == (1, 3)
    np.testing.assert_allclose(np.abs(z.directions[0]), [0, 1, 0], atol=1e-12)
    # base point solves both tangent-plane equations (x + z = 1, -x + z = -1)
    x, y, zc = z.base_point
    assert abs(x + zc - 1.0) < 1e-12
    assert abs(-x + zc + 1.0) < 1e-12
    np.testing.assert_allclose(z.base_point, [1, 0, 0], atol=1e-12)


def test_tangent_intersection_direction_rotational():
    s1 = rotational("t^2")
    s2 = Surface.parametric(
        ["(t - t^2)*cos(theta)", "(t - t^2)*sin(theta)", "-t^2"],
        ["t", "theta"],
        [(0.2, 0.45), (0.0, 2 * np.pi)],
    )
    for t, theta in [(0.3, 0.7), (0.4, 2.1), (0.25, 5.0)]:
        j1 = surface_jet(s1, (t, theta))
        j2 = surface_jet(s2, (t, theta))
        z = tangent_intersection(j1, j2)
        expected = np.array([np.sin(theta), -np.cos(theta), 0.0])
        assert abs(abs(z.directions[0] @ expected) - 1.0) < 1e-10


def test_tangent_intersection_rejects_parallel():
    s1 = Surface.graph("u + v + u^2 + v^2", ["u", "v"], [(-1, 1), (-1, 1)])
    s2 = Surface.graph("u + v - 3 - u^2 - v^2", ["u", "v"], [(-1, 1), (-1, 1)])
    j1 = surface_jet(s1, (0.0, 0.0))
    j2 = surface_jet(s2, (0.0, 0.0))
    with pytest.raises(TransversalityError):
        tangent_intersection(j1, j2)


def test_tangent_intersection_projector_basis_independent():
    j1 = surface_jet(F1, (0.05, -0.1))
    j2 = surface_jet(F2, (-0.02, 0.08))
    z = tangent_intersection(j1, j2)
    p1 = z.projector()
    # independent derivation of the Z direction: cross product of conormals
    n1 = transversal_frame(j1).conormal
    n2 = transversal_frame(j2).conormal
    d = np.cross(n1, n2)
    d = d / np.linalg.norm(d)
    p2 = np.outer(d, d)
    np.testing.assert_allclose(p1, p2, atol=1e-12)


# -- h_orthogonal_direction -----------------------------------------------------


def test_h_orthogonal_direction_normal_form():
    j1 = surface_jet(F1, (0.0, 0.0))
    fr1 = transversal_frame(j1)
    z = tangent_intersection(j1, surface_jet(F2, (0.0, 0.0)))
    y = h_orthogonal_direction(j1, fr1, z)
    np.testing.assert_allclose(y, np.array([1, 0, -1]) / np.sqrt(2), atol=1e-12)
    y_param = h_orthogonal_param(j1, fr1, z)
    np.testing.assert_allclose(y_param, [1.0, 0.0], atol=1e-12)


def test_h_orthogonal_direction_curve_is_unit_tangent():
    c = Surface.parametric(["cos(t)", "sin(t)"], ["t"], [(0.0, 2 * np.pi)])
    j = surface_jet(c, (0.5,))
    fr = transversal_frame(j)
    from midplanes.surfaces import AffineSubspace

    z = AffineSubspace(np.zeros(2), np.zeros((0, 2)))
    y = h_orthogonal_direction(j, fr, z)
    t = j.tangents[0] / np.linalg.norm(j.tangents[0])
    assert min(np.linalg.norm(y - t), np.linalg.norm(y + t)) < 1e-12


def test_h_orthogonal_with_mixed_term_leaves_coordinate_direction():
    # nonzero f_uv makes h(psi_u, psi_v) nonzero, so the h-orthogonal direction
    # cannot stay along psi_u when Z runs along psi_v
    s = Surface.graph("u^2 + v^2 + 0.8*u*v", ["u", "v"], [(-1, 1), (-1, 1)])
    s_flip = Surface.graph("-u^2 - v^2 - 0.8*u*v + 0.5*u", ["u", "v"], [(-1, 1), (-1, 1)])
    j = surface_jet(s, (0.0, 0.0))
    fr = transversal_frame(j)
    z = tangent_intersection(j, surface_jet(s_flip, (0.0, 0.0)))
    # here Z is spanned by psi_v = e_y
    np.testing.assert_allclose(np.abs(z.directions[0]), [0, 1, 0], atol=1e-12)
    y_param = h_orthogonal_param(j, fr, z)
    assert abs(y_param[1]) > 0.1  # not the psi_u direction
    # and h-orthogonality holds
    assert abs(y_param @ fr.metric @ np.array([0.0, 1.0])) < 1e-12


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-0.3, 0.3), st.floats(-0.3, 0.3),
    st.floats(-1.5, 1.5), st.floats(-1.0, 1.0),
    st.floats(0.4, 1.6), st.floats(0.4, 1.6),
)
def test_mixed_term_criterion(u, v, cuv, cuuv, a, b):
    # h(psi_u, psi_v) vanishes exactly when f_uv does (graph patches)
    s = Surface.graph(
        f"{a!r}*u^2 + {b!r}*v^2 + {cuv!r}*u*v + {cuuv!r}*u^2*v", ["u", "v"],
        [(-0.5, 0.5), (-0.5, 0.5)],
    )
    j = surface_jet(s, (u, v))
    fr = transversal_frame(j)
    f_uv = cuv + 2 * cuuv * u
    scale = max(float(np.max(np.abs(fr.metric))), 1.0)
    assert abs(fr.metric[0, 1] - f_uv) < 1e-12 * scale
    if abs(f_uv) > 1e-9:
        assert abs(fr.metric[0, 1]) > 1e-12 * scale
