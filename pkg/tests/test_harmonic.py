import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_instances
from modtandem.exact import solve_pn
from modtandem.harmonic import (
    BasisTerm,
    HarmonicFn,
    assemble_haK,
    boundary_max,
    boundary_min,
    build_bound_certificate,
    build_frak_h,
    build_frak_h_rho2,
    build_h_a0,
    build_h_rho2_super,
    c_star,
    c_vector,
    combine,
    eval_basis,
    family_function,
    h_rho1,
    lower_bound_max_function,
    eval_lower_bound_pn,
    residual_grid,
    single_term,
    x_residual_grid,
)
from modtandem.roots import SurfacePoint, build_root_catalog


def loop_residual(params, h, y1, y2, m):
    """Expected next value minus current value, enumerating every move."""
    P = params.P
    out = 0.0
    for k in range(params.num_regimes):
        if k != m:
            out += P[m, k] * h(y1, y2)[k]
    s = P[m, m]
    down = h(y1, y2 - 1)[m] if y2 > 0 else h(y1, y2)[m]
    out += s * (params.lam[m] * h(y1 - 1, y2)[m] + params.mu1[m] * h(y1 + 1, y2 + 1)[m] + params.mu2[m] * down)
    return out - h(y1, y2)[m]


def interior(size=12):
    y1, y2 = np.meshgrid(np.arange(1, size), np.arange(size), indexing="ij")
    keep = y1 > y2
    return y1[keep], y2[keep]


def test_eval_basis():
    pt = SurfacePoint(0.5, 0.25, np.array([1.0, 0.5]), 1)
    assert eval_basis(pt, (3, 1), 1) == pytest.approx(0.5**2 * 0.25 * 0.5)
    assert eval_basis(pt, (0, 0), 0) == 1
    with pytest.raises(ValueError):
        eval_basis(pt, (1, -1), 0)


def test_harmonic_fn_matches_basis_sum(ref_catalog):
    fam = ref_catalog.circle_families[2]
    pts = [fam.base] + list(fam.conjugates)
    weights = [1.0, 0.3 - 0.2j, -1.1j, 0.7]
    fn = HarmonicFn([BasisTerm(p, w) for p, w in zip(pts, weights)])
    for y in ((0, 0), (4, 1), (9, 9)):
        for m in range(3):
            direct = sum(w * eval_basis(p, y, m) for p, w in zip(pts, weights))
            assert fn(*y)[m] == pytest.approx(direct, abs=1e-14)


def test_c_vector_scalar(scalar, scalar_catalog):
    assert c_vector(scalar, scalar_catalog.rho2)[0] == pytest.approx(0.5 * (1 - 0.4))
    assert c_vector(scalar, scalar_catalog.alpha_star[0])[0] == pytest.approx(0.5 * (1 - 0.6))
    assert np.all(c_vector(scalar, scalar_catalog.rho1) == 0)


def test_c_vector_signs(ref, ref_catalog):
    assert np.all(c_vector(ref, ref_catalog.rho2) > 0)
    assert np.all(c_vector(ref, ref_catalog.rho1) == 0)


def test_residual_grid_matches_loop(ref, ref_catalog):
    fn = family_function(ref, ref_catalog.circle_families[0])
    y1, y2 = interior(8)
    grid = residual_grid(ref, fn, y1, y2)
    for i in range(y1.size):
        for m in range(3):
            assert grid[i, m] == pytest.approx(loop_residual(ref, fn, y1[i], y2[i], m), abs=1e-15)


def test_single_term_defect_on_lower_boundary(ref, ref_catalog):
    star = ref_catalog.alpha_star[0]
    fn = single_term(star, "star", boundary_determined=False)
    res = residual_grid(ref, fn, np.array(5), np.array(0))
    np.testing.assert_allclose(res, star.beta**5 * c_vector(ref, star), atol=1e-15)
    y1, y2 = interior()
    off = y2 > 0
    assert np.abs(residual_grid(ref, fn, y1[off], y2[off])).max() <= 1e-13


def test_h_rho1_harmonic_everywhere(ref, ref_catalog):
    y1, y2 = interior(30)
    fn = h_rho1(ref_catalog)
    assert np.abs(residual_grid(ref, fn, y1, y2)).max() <= 1e-14
    for branch in ref_catalog.rho1_branches:
        assert np.abs(residual_grid(ref, single_term(branch, "b"), y1, y2)).max() <= 1e-14


def test_families_harmonic(ref, ref_catalog):
    y1, y2 = interior(31)
    for fam in ref_catalog.families():
        fn = family_function(ref, fam)
        scale = np.abs(fn(y1, y2)).max()
        assert np.abs(residual_grid(ref, fn, y1, y2)).max() <= 1e-13 * max(1.0, scale)


def test_random_instances_harmonic():
    y1, y2 = interior(16)
    for params in random_instances(8, seed=7):
        cat = build_root_catalog(params, 2, 0.6)
        for fam in cat.families():
            fn = family_function(params, fam)
            scale = max(1.0, np.abs(fn(y1, y2)).max())
            assert np.abs(residual_grid(params, fn, y1, y2)).max() <= 1e-12 * scale


def test_superharmonic_weight(ref, ref_catalog):
    fn, c0 = build_h_rho2_super(ref, ref_catalog)
    assert c0 < 0
    assert c0 == pytest.approx(-7.6159, abs=1e-3)
    y1, y2 = interior(30)
    res = residual_grid(ref, fn, y1, y2)
    assert res.max() <= 1e-14
    edge = residual_grid(ref, fn, np.arange(1, 30), np.zeros(29, int))
    assert np.all(edge < 0)


def test_scalar_superharmonic_uses_max_branch(scalar, scalar_catalog):
    # alpha*_1 = rho1 > rho2 here, so the weight is set by the minimum
    fn, c0 = build_h_rho2_super(scalar, scalar_catalog)
    assert c0 == pytest.approx(-1.1 * 0.3 / 0.2)


def test_bound_certificate(ref, ref_catalog):
    cert, upper = build_bound_certificate(ref, ref_catalog)
    assert cert.c2 > 0 and cert.c1 >= 0
    ks = np.arange(600)
    assert np.real(upper(ks, ks)).min() >= 1 - 1e-12
    lo, _ = boundary_min(upper)
    assert lo >= 1 - 1e-12


def test_frak_h_rho2_limit(ref, ref_catalog):
    fn = build_frak_h_rho2(ref, ref_catalog)
    np.testing.assert_allclose(fn(400, 400), ref_catalog.rho2.d, atol=1e-12)


def test_frak_h_tends_to_one(ref, ref_catalog):
    fn = build_frak_h(ref, ref_catalog)
    assert np.abs(fn(200, 200) - 1).max() <= 1e-6
    assert c_star(fn) == pytest.approx(3.687, abs=1e-3)


def test_boundary_gate():
    with pytest.raises(ValueError):
        HarmonicFn([BasisTerm(SurfacePoint(1.2, 0.5, np.ones(1), 1))], boundary_determined=True)
    with pytest.raises(ValueError):
        HarmonicFn([BasisTerm(SurfacePoint(0.5, 1.5, np.ones(1), 1))], boundary_determined=True)
    HarmonicFn([BasisTerm(SurfacePoint(1.2, 0.5, np.ones(1), 1))], boundary_determined=False)


def test_assemble_fit(ref, ref_haK):
    h, real = ref_haK
    assert h.meta["system_size"] == 18 and h.meta["fit_residual"] <= 1e-10
    assert h.meta["condition"] < 1e3
    nodes = np.arange(6)
    assert np.abs(real(nodes, nodes) - 1).max() <= 1e-10


def test_scalar_fit_is_exact(scalar, scalar_catalog):
    # frak_h(k,k) = 1 - 1.5 (2/3)**k and h_rho1(k,k) = (2/3)**k, so phi = 1.5
    h, real = assemble_haK(scalar, scalar_catalog)
    assert h.meta["coefficients"][0][0] == pytest.approx(1.5, abs=1e-12)
    assert c_star(real) <= 1e-14


def test_fit_improves_on_frak(ref, ref_catalog, ref_haK):
    assert c_star(ref_haK[1]) <= c_star(build_frak_h(ref, ref_catalog))


def test_h_a0(ref, ref_catalog):
    fn, cert = build_h_a0(ref, ref_catalog)
    lo, _ = boundary_min(fn)
    assert lo >= 1 - 1e-12
    hi, _ = boundary_max(fn)
    assert np.isfinite(cert.c9) and cert.c9 == pytest.approx(hi) and cert.c9 >= 1
    assert cert.c11 == pytest.approx(2 / np.real(ref_catalog.rho2.d).min())
    y1, y2 = interior(25)
    assert np.abs(residual_grid(ref, fn, y1, y2)).max() <= 1e-12


def test_lower_bound(ref, ref_catalog):
    assert eval_lower_bound_pn(ref, ref_catalog, 40, (0, 0), 0) <= 0
    exact = solve_pn(ref, 40)
    for x in ((20, 10), (5, 30), (39, 0)):
        for m in range(3):
            lb = eval_lower_bound_pn(ref, ref_catalog, 40, x, m)
            assert lb <= exact.values[x[0], x[1], m] + 1e-15
    assert eval_lower_bound_pn(ref, ref_catalog, 40, (20, 10), 0) > 0
    with pytest.raises(ValueError):
        eval_lower_bound_pn(ref, ref_catalog, 40, (30, 20), 0)


def test_max_function_subharmonic(ref, ref_catalog):
    n = 30
    g = lower_bound_max_function(ref_catalog, n)
    x1, x2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    keep = x1 + x2 < n
    res = x_residual_grid(ref, g, x1[keep], x2[keep])
    scale = g(x1[keep], x2[keep])
    assert np.all(res >= -1e-12 * scale)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 40), st.integers(0, 40))
def test_combine_is_linear(a, b, y1, y2):
    pts = [SurfacePoint(0.3, 0.8, np.array([1.0, 0.4]), 1), SurfacePoint(0.5 + 0.1j, 0.6j, np.array([1.0, -0.2j]), 1)]
    f = single_term(pts[0], "f")
    g = single_term(pts[1], "g")
    lhs = combine([(a, f), (b, g)])(y1 + y2, y2)
    np.testing.assert_allclose(lhs, a * f(y1 + y2, y2) + b * g(y1 + y2, y2), atol=1e-12)
    np.testing.assert_allclose(f.scaled(a)(y1, 0), a * f(y1, 0), atol=1e-12)
