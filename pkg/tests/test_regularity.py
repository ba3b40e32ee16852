import numpy as np
import pytest

from midplanes.affine import AffineMap
from midplanes.conics import contact_conic, normal_form, normal_form_surfaces
from midplanes.envelope import build_pair, envelope_point
from midplanes.regularity import (
    delta,
    jg1_closed_form,
    jg1_closed_form_general,
    jg1_numeric,
    regularity_report,
    special_case_report,
)
from midplanes.surfaces import Surface

NF_MATRIX = np.array([
    [6.0, 0.0, 0.0, 0.0],
    [0.0, -2.0, 0.0, 4.0],
    [0.0, 0.0, -6.0, 0.0],
    [0.0, 4.0, 0.0, -2.0],
])


def nf_solution(p=-1.0, epsilon=1, a=1.0, b=1.0, third1=(0, 0, 0, 0), third2=(0, 0, 0, 0)):
    s1, s2 = normal_form_surfaces(p, epsilon, a, b, third1, third2)
    sol = envelope_point(build_pair(s1, (0.0, 0.0), s2, (0.0, 0.0)))
    assert sol.converged
    return sol


def test_jg1_numeric_on_worked_pair():
    sol = nf_solution()
    jg1 = jg1_numeric(sol)
    np.testing.assert_allclose(jg1, NF_MATRIX, atol=1e-6)


def test_jg1_numeric_symmetry():
    sol = nf_solution(p=-0.7, a=0.9, b=0.4, third1=(0.3, -0.2, 0.1, 0.5))
    jg1 = jg1_numeric(sol)
    assert np.linalg.norm(jg1 - jg1.T) < 1e-6


def test_jg1_numeric_curve_pair_is_2x2():
    c = Surface.parametric(["1.3*cos(t)", "0.7*sin(t)"], ["t"], [(0.0, 2 * np.pi)])
    sol = envelope_point(build_pair(c, (0.3,), c, (1.9,)))
    assert jg1_numeric(sol).shape == (2, 2)


def test_delta_on_worked_pair():
    sol = nf_solution()
    det, smooth = delta(sol)
    assert det == pytest.approx(432.0, rel=1e-3)
    assert smooth
    # cross-check against the factored form 6 * (-6) * (-12)
    report = special_case_report(normal_form(sol), numeric_delta=det)
    assert report.prefactor1 == pytest.approx(6.0, abs=1e-9)
    assert report.prefactor2 == pytest.approx(-6.0, abs=1e-9)
    assert report.delta_quad == pytest.approx(-12.0, abs=1e-9)
    assert report.factored_delta == pytest.approx(432.0, abs=1e-6)
    assert report.verdict_consistent


def test_closed_form_matches_worked_matrix():
    nf = normal_form(nf_solution())
    np.testing.assert_allclose(jg1_closed_form(nf), NF_MATRIX, atol=1e-9)
    np.testing.assert_allclose(jg1_closed_form_general(nf), NF_MATRIX, atol=1e-9)


def test_numeric_matches_closed_form_randomized():
    rng = np.random.default_rng(42)
    for _ in range(15):
        p = -rng.uniform(0.3, 2.0)
        a = rng.uniform(0.2, 1.0) * rng.choice([-1, 1])
        b = rng.uniform(0.2, 1.0) * rng.choice([-1, 1])
        third1 = rng.uniform(-1, 1, size=4)
        third2 = rng.uniform(-1, 1, size=4)
        sol = nf_solution(p, 1, a, b, third1, third2)
        nf = normal_form(sol)
        num = jg1_numeric(sol)
        closed = jg1_closed_form(nf)
        np.testing.assert_allclose(num, closed, rtol=1e-4, atol=1e-4)


def test_numeric_matches_general_form_for_negative_epsilon():
    rng = np.random.default_rng(7)
    for _ in range(8):
        p = rng.uniform(0.3, 2.0)
        if 0.85 < p < 1.15:
            continue  # p^2 + epsilon ~ 0 makes the pair degenerate
        a = rng.uniform(0.2, 1.0) * rng.choice([-1, 1])
        b = rng.uniform(0.2, 1.0) * rng.choice([-1, 1])
        third1 = rng.uniform(-1, 1, size=4)
        third2 = rng.uniform(-1, 1, size=4)
        sol = nf_solution(p, -1, a, b, third1, third2)
        nf = normal_form(sol)
        assert nf.epsilon == -1
        num = jg1_numeric(sol)
        np.testing.assert_allclose(num, jg1_closed_form_general(nf), rtol=1e-4, atol=1e-4)
        # the matrix as printed is an epsilon = +1 formula and must disagree here
        assert not np.allclose(num, jg1_closed_form(nf), rtol=1e-3, atol=1e-3)


def test_uvv_coefficient_enters_not_vvv():
    # two pairs differing only in the v^3 coefficients give the same block;
    # differing in the u v^2 coefficients they do not
    base = dict(p=-0.8, epsilon=1, a=0.6, b=0.5)
    sol_a = nf_solution(**base, third1=(0.1, 0.2, 0.3, 0.9), third2=(0.2, -0.1, 0.4, -0.7))
    sol_b = nf_solution(**base, third1=(0.1, 0.2, 0.3, -0.5), third2=(0.2, -0.1, 0.4, 0.3))
    np.testing.assert_allclose(jg1_numeric(sol_a), jg1_numeric(sol_b), atol=1e-5)
    sol_c = nf_solution(**base, third1=(0.1, 0.2, -0.6, 0.9), third2=(0.2, -0.1, 0.4, -0.7))
    assert not np.allclose(jg1_numeric(sol_a), jg1_numeric(sol_c), atol=1e-3)


def test_quadric_case_determinant_factors():
    # a + b = 0 decouples the block; the determinant is the product of the two
    # corner determinants (with the u v^2 cubic coefficients)
    sol = nf_solution(p=-0.9, a=0.7, b=-0.7,
                      third1=(0.2, 0.3, -0.4, 0.8), third2=(-0.1, 0.25, 0.15, -0.6))
    nf = normal_form(sol)
    det, _ = delta(sol)
    report = special_case_report(nf, numeric_delta=det)
    assert report.quadric_case
    assert det == pytest.approx(report.delta1_uvv * report.delta2_uvv, rel=1e-3)
    # the v^3 variant does not reproduce the determinant here
    assert abs(det - report.delta1_vvv * report.delta2_vvv) > 1e-2 * abs(det)


def test_factored_delta_with_vanishing_mixed_cubics():
    sol = nf_solution(p=-1.2, a=0.8, b=0.3,
                      third1=(0.4, 0.0, 0.0, 0.7), third2=(-0.3, 0.0, 0.0, 0.5))
    nf = normal_form(sol)
    det, _ = delta(sol)
    report = special_case_report(nf, conic=contact_conic(sol), numeric_delta=det)
    assert report.mixed_cubics_vanish
    assert report.delta_quad is not None and report.delta_quad < 0
    assert det == pytest.approx(report.factored_delta, rel=1e-3)
    # nonzero prefactors go with contacts of order exactly 3
    assert report.contact_exactly_3 == (True, True)
    assert abs(report.prefactor1) > 1e-6 and abs(report.prefactor2) > 1e-6


def test_verdict_stable_under_affine_maps():
    rng = np.random.default_rng(19)
    s1, s2 = normal_form_surfaces(-1.0, 1, 1.0, 1.0)
    for _ in range(10):
        lin = rng.normal(size=(3, 3))
        while abs(np.linalg.det(lin)) < 0.2:
            lin = rng.normal(size=(3, 3))
        phi = AffineMap(lin, rng.normal(size=3))
        sol = envelope_point(
            build_pair(s1.transformed(phi), (0.0, 0.0), s2.transformed(phi), (0.0, 0.0))
        )
        _, smooth = delta(sol)
        assert smooth


def test_regularity_report_bundles_everything():
    sol = nf_solution()
    nf = normal_form(sol)
    rep = regularity_report(sol, nf=nf, conic=contact_conic(sol))
    assert rep.smooth and rep.delta == pytest.approx(432.0, rel=1e-3)
    np.testing.assert_allclose(rep.closed_form, NF_MATRIX, atol=1e-9)
    assert rep.special is not None and rep.special.contact_exactly_3 == (True, True)
