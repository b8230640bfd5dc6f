import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modtandem.characteristic import (
    BoundaryKind,
    branch_values,
    build_char_matrix,
    char_entries,
    char_poly_in,
    check_simple_real_eigenvalues,
    default_grid,
    det_i_minus_a,
    eigen_sorted,
    hamiltonian,
    perron_root,
    trace_level_curves,
)
from modtandem.model import ModelParams

pos = st.floats(0.05, 3.0)


def test_scalar_at_one(scalar):
    assert build_char_matrix(scalar, 1.0, 1.0).entries[0, 0] == pytest.approx(1.0, abs=1e-15)


@given(st.floats(0.01, 5.0))
def test_diagonal_matches_boundary2(beta):
    from modtandem.model import reference_model
    ref = reference_model()
    np.testing.assert_array_equal(char_entries(ref, beta, beta),
                                  char_entries(ref, beta, beta, BoundaryKind.BOUNDARY2))


@given(pos, pos)
def test_entry_identity(beta, alpha):
    from modtandem.model import reference_model
    ref = reference_model()
    for kind, p in [
        (BoundaryKind.INTERIOR, ref.lam / beta + ref.mu1 * alpha + ref.mu2 * beta / alpha),
        (BoundaryKind.BOUNDARY1, ref.lam / beta + ref.mu1 + ref.mu2 * beta / alpha),
        (BoundaryKind.BOUNDARY2, ref.lam / beta + ref.mu1 * alpha + ref.mu2),
    ]:
        A = build_char_matrix(ref, beta, alpha, kind).entries
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_array_equal(A[off], ref.P[off])
        np.testing.assert_allclose(np.diag(A), ref.stay * p, rtol=1e-15)


def test_constant_ratio_gives_P():
    params = ModelParams([[0.5, 0.5], [0.5, 0.5]], [0.2, 0.1], [0.4, 0.7], [0.4, 0.2])
    np.testing.assert_allclose(char_entries(params, 0.5, 1.0), params.P, atol=1e-15)


def test_zero_arguments_rejected(ref):
    with pytest.raises(ValueError):
        build_char_matrix(ref, 0.0, 1.0)
    with pytest.raises(ValueError):
        build_char_matrix(ref, 1.0, 0.0)


def test_eigen_of_P(ref):
    eig = eigen_sorted(ref.P)
    assert eig.sorted_real
    assert eig.values[0] == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(eig.vectors[:, 0], np.ones(3), atol=1e-13)


def test_eigen_symmetric_2x2():
    eig = eigen_sorted(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(eig.values, [3.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(eig.vectors[:, 0], [1, 1], atol=1e-14)
    np.testing.assert_allclose(eig.vectors[:, 1], [1, -1], atol=1e-14)


def test_reference_distinct_real(ref):
    w = branch_values(ref, 0.5, 0.5, strict=True)
    assert np.all(-np.diff(w) > 1e-3)


@given(pos, pos)
def test_perron_vector_positive(beta, alpha):
    from modtandem.model import reference_model
    eig = eigen_sorted(char_entries(reference_model(), beta, alpha))
    assert eig.sorted_real
    assert np.all(eig.vectors[:, 0] > 0)
    assert eig.vectors[:, 0].max() == 1.0


def test_scalar_polynomial_in_alpha(scalar):
    coef = char_poly_in(scalar, beta=0.4)
    lam, mu1 = 0.2, 0.3
    np.testing.assert_allclose(coef / coef[-1], np.array([lam, -(lam + mu1), mu1]) / mu1, atol=1e-14)
    np.testing.assert_allclose(np.sort(np.roots(coef[::-1]).real), [2 / 3, 1.0], atol=1e-12)


def test_polynomial_vanishes_at_rho2(ref, ref_catalog):
    coef = char_poly_in(ref, alpha=1.0)
    assert abs(np.polyval(coef[::-1], ref_catalog.rho2.beta)) <= 1e-10
    assert len(coef) == 7 and abs(coef[-1]) > 1e-6


def test_polynomial_matches_direct_determinant(ref):
    rng = np.random.default_rng(5)
    for fixed in (0.3, 0.7 * np.exp(0.4j)):
        for name in ("beta", "alpha"):
            coef = char_poly_in(ref, **{name: fixed})
            for _ in range(5):
                z = complex(rng.uniform(0.2, 2) * np.exp(1j * rng.uniform(0, 2 * np.pi)))
                b, a = (fixed, z) if name == "beta" else (z, fixed)
                direct = det_i_minus_a(ref, b, a) * z**3
                assert abs(np.polyval(coef[::-1], z) - direct) <= 1e-8 * abs(direct)


def test_hamiltonian_values(scalar, ref, ref_catalog):
    assert hamiltonian(scalar, (0.0, 0.0)) == pytest.approx(0.0, abs=1e-15)
    r1 = np.log(ref_catalog.rho1.beta)
    assert hamiltonian(ref, (r1, r1)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50)
@given(st.floats(-4, 1), st.floats(-4, 1))
def test_hamiltonian_concave_on_diagonal(a, b):
    # log of the Perron root is convex (entries are log-convex in q)
    from modtandem.model import reference_model
    ref = reference_model()
    mid = hamiltonian(ref, ((a + b) / 2, (a + b) / 2))
    ends = (hamiltonian(ref, (a, a)) + hamiltonian(ref, (b, b))) / 2
    assert mid >= ends - 1e-12


def test_simplicity_reports(ref, scalar):
    rep = check_simple_real_eigenvalues(ref, default_grid())
    assert rep.tridiagonal_strict and rep.simple
    assert check_simple_real_eigenvalues(scalar, default_grid(5)).simple
    half = ModelParams([[0.5, 0.5], [0.5, 0.5]], [0.1, 0.1], [0.5, 0.5], [0.4, 0.4])
    assert check_simple_real_eigenvalues(half, default_grid(5)).tridiagonal_strict


def test_gershgorin_blow_up(ref):
    vals = [perron_root(ref, b, 0.5) for b in np.geomspace(0.1, 1e-4, 12)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] > 100


def test_level_curve_hits_distinguished_points(ref, ref_catalog):
    at_one = [b for _, _, b in trace_level_curves(ref, 1, resolution=1, alpha_range=(1.0, 1.0))]
    assert min(abs(b - ref_catalog.rho2.beta) for b in at_one) < 1e-10
    r1 = ref_catalog.rho1.beta
    at_r1 = [b for _, _, b in trace_level_curves(ref, 1, resolution=1, alpha_range=(r1, r1))]
    assert min(abs(b - r1) for b in at_r1) < 1e-10


def test_level_curves_nested(ref):
    for alpha in (0.3, 1.0, 1.5):
        inner = sorted(b for _, _, b in trace_level_curves(ref, 1, 1, alpha_range=(alpha, alpha)))
        outer = sorted(b for _, _, b in trace_level_curves(ref, 2, 1, alpha_range=(alpha, alpha)))
        assert len(inner) == 2 and len(outer) == 2
        assert outer[0] < inner[0] < inner[1] < outer[1]


def test_scalar_level_curve_identity(scalar):
    for _, a, b in trace_level_curves(scalar, 1, resolution=30):
        assert 0.2 / b + 0.3 * a + 0.5 * b / a == pytest.approx(1.0, abs=1e-10)
