from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modtandem.errors import ModelError, ParseError, StabilityError
from modtandem.model import (
    ModelParams,
    check_stability,
    format_model,
    is_irreducible,
    parse_model,
    period,
    require_valid,
    stationary_distribution,
)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_two_state_closed_form(a, b):
    pi = stationary_distribution([[1 - a, a], [b, 1 - b]])
    np.testing.assert_allclose(pi, np.array([b, a]) / (a + b), rtol=1e-12)


def test_row_sum_violation_rejected():
    with pytest.raises(ModelError):
        stationary_distribution([[0.5, 0.4], [0.5, 0.5]])


def test_reference_stationary(ref):
    # birth-death chain: pi2 = 4 pi1, pi3 = 2.5 pi2
    np.testing.assert_allclose(stationary_distribution(ref.P), [1 / 15, 4 / 15, 10 / 15], atol=1e-15)


@st.composite
def stochastic(draw):
    size = draw(st.integers(1, 5))
    rows = draw(st.lists(st.lists(st.floats(0.01, 1.0), min_size=size, max_size=size),
                         min_size=size, max_size=size))
    P = np.array(rows)
    return P / P.sum(axis=1, keepdims=True)


@settings(max_examples=60)
@given(stochastic())
def test_stationary_fixed_point(P):
    pi = stationary_distribution(P)
    assert np.abs(pi @ P - pi).max() <= 1e-12
    assert pi.min() > 0


def test_margins_single_regime():
    rep = check_stability(ModelParams([[1.0]], [0.2], [0.3], [0.5]))
    np.testing.assert_allclose(rep.stability_margins, (-0.1, -0.3), atol=1e-15)
    assert rep.stable and rep.ok


def test_margins_reference_independent_sum(ref):
    pi = [Fraction(1, 15), Fraction(4, 15), Fraction(10, 15)]
    stay = [Fraction(6, 10), Fraction(4, 10), Fraction(8, 10)]
    lam = [Fraction(s) for s in ("0.1", "0.12", "0.09")]
    mu1 = [Fraction(s) for s in ("0.4", "0.41", "0.39")]
    mu2 = [Fraction(s) for s in ("0.5", "0.47", "0.52")]
    s1 = sum((l - m) * p * d for l, m, p, d in zip(lam, mu1, pi, stay))
    s2 = sum((l - m) * p * d for l, m, p, d in zip(lam, mu2, pi, stay))
    rep = check_stability(ref)
    np.testing.assert_allclose(rep.stability_margins, (float(s1), float(s2)), rtol=1e-13)
    assert rep.stable and rep.tridiagonal_strict


def test_unstable_single_regime():
    rep = check_stability(ModelParams([[1.0]], [0.6], [0.2], [0.2]))
    np.testing.assert_allclose(rep.stability_margins, (0.4, 0.4))
    assert not rep.stable
    with pytest.raises(StabilityError):
        require_valid(ModelParams([[1.0]], [0.6], [0.2], [0.2]))


def test_rates_must_sum_to_one():
    rep = check_stability(ModelParams([[1.0]], [0.2], [0.3], [0.4]))
    assert not rep.rates_normalized_ok
    with pytest.raises(ModelError):
        require_valid(ModelParams([[1.0]], [0.2], [0.3], [0.4]))


def test_zero_diagonal_rejected():
    rep = check_stability(ModelParams([[0.0, 1.0], [0.5, 0.5]], [0.2, 0.2], [0.4, 0.4], [0.4, 0.4]))
    assert not rep.stochastic_ok


def test_irreducibility_and_period():
    assert not is_irreducible([[1.0, 0.0], [0.5, 0.5]])
    assert period([[0.0, 1.0], [1.0, 0.0]]) == 2
    assert period([[0.5, 0.5], [1.0, 0.0]]) == 1


def test_parse_roundtrip(ref):
    back = parse_model(format_model(ref))
    for k in ("P", "lam", "mu1", "mu2"):
        np.testing.assert_array_equal(getattr(back, k), getattr(ref, k))


def test_parse_comments_and_commas():
    text = "# c\nnum_regimes: 2\nP = 0.5, 0.5\nP = 0.3 0.7  # row two\nlam=0.1 0.1\nmu1=0.5 0.5\nmu2=0.4 0.4\n"
    params = parse_model(text)
    assert params.num_regimes == 2
    np.testing.assert_array_equal(params.P[1], [0.3, 0.7])


@pytest.mark.parametrize("text,line", [
    ("num_regimes = 2\nP = 0.5 0.5\nP = 0.3\n", 3),
    ("num_regimes = 2\nP = 0.5 0.5\nP = 0.3 0.7\nlam = x 0.1\n", 4),
    ("num_regimes = 1\nfoo = 1\n", 2),
    ("P = 1.0\n", 1),
    ("num_regimes = 1\nP = 1\nlam = 0.2\nmu1 = 0.3\n", 5),
    ("num_regimes = 1\nP = 1\nP = 1\n", 3),
    ("num_regimes = 1\njunk line\n", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_model(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")
