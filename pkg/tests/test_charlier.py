import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracles import charlier_explicit, poisson1_poly_moment
from poissonchaos.charlier import (
    CharlierPoly,
    Regime,
    Scale,
    chaos_identity_check,
    charlier,
    poisson_moment,
    scale_classifier,
    scale_exponents,
)
from poissonchaos.errors import InputError, OutOfRange

# ascending coefficients of the displayed H_1..H_4
DISPLAYED = {
    1: (-1, 1),
    2: (1, -3, 1),
    3: (-1, 8, -6, 1),
    4: (1, -24, 29, -10, 1),
}


@pytest.mark.parametrize("q", sorted(DISPLAYED))
def test_displayed_polynomials(q):
    assert charlier(q).coefficients == DISPLAYED[q]


@pytest.mark.parametrize("q", range(0, 9))
def test_recurrence_matches_falling_factorial_formula(q):
    assert list(charlier(q).coefficients) == charlier_explicit(q)


def test_text_form():
    assert str(charlier(4)) == "x^4 - 10x^3 + 29x^2 - 24x + 1"
    assert str(charlier(1)) == "x - 1"
    assert str(CharlierPoly((0,))) == "0"
    assert str(CharlierPoly((0, -1))) == "-x"


def test_poly_algebra():
    x = CharlierPoly((0, 1))
    p = (x + CharlierPoly((1,))) ** 2
    assert p.coefficients == (1, 2, 1)
    assert p(3) == 16
    assert p.shift(-1).coefficients == (0, 0, 1)
    assert (p - p).coefficients == (0,)
    assert (2 * p).leading == 2
    assert CharlierPoly((1, 2, 0, 0)).q == 1
    with pytest.raises(InputError):
        x ** -1
    with pytest.raises(InputError):
        charlier(-1)


@pytest.mark.parametrize("p", range(6))
@pytest.mark.parametrize("q", range(6))
def test_orthogonality(p, q):
    exact = poisson1_poly_moment((charlier(p) * charlier(q)).coefficients)
    assert exact == (math.factorial(q) if p == q else 0)
    assert poisson_moment([charlier(p), charlier(q)]) == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("k", range(0, 9))
def test_raw_moments_are_bell_numbers(k):
    mono = CharlierPoly((0,) * k + (1,))
    assert poisson_moment(mono) == pytest.approx(poisson1_poly_moment(mono.coefficients), rel=1e-14)


@pytest.mark.parametrize("q", [1, 2, 3])
@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_chaos_identity(q, m):
    res = chaos_identity_check(q, m)
    exact = poisson1_poly_moment((charlier(q) ** m).coefficients)
    assert res.partition_sum == pytest.approx(exact, rel=1e-12, abs=1e-12)
    assert res.residual <= 1e-8


def test_classifier_regimes():
    assert scale_classifier(1, Scale(0.25)) is Regime.MDP_HOLDS
    assert scale_classifier(2, Scale(1 / 6)) is Regime.MDP_HOLDS
    assert scale_classifier(2, Scale(0.2)) is Regime.MDP_FAILS
    assert scale_classifier(3, Scale(0.1)) is Regime.MDP_HOLDS
    # the boundary theta = 1/(2(2q-1)) is decided by the log factor
    assert scale_exponents(2, Scale(Fraction(1, 6))) == (Fraction(0), Fraction(1))
    assert scale_classifier(2, Scale(Fraction(1, 6), rho=1)) is Regime.MDP_FAILS
    assert scale_classifier(2, Scale(Fraction(1, 6), rho=Fraction(1, 2))) is Regime.MDP_HOLDS
    assert scale_classifier(2, Scale(0, rho=1)) is Regime.MDP_HOLDS


def test_classifier_rejects_inadmissible_scales():
    for bad in (Scale(0.0), Scale(-0.1), Scale(0.5), Scale(0.7), Scale(0.25, c=0)):
        with pytest.raises(OutOfRange):
            scale_classifier(2, bad)
    assert scale_classifier(1, Scale(0.5, rho=-1)) is Regime.MDP_HOLDS
    with pytest.raises(InputError):
        scale_classifier(0, Scale(0.2))


def test_scale_callable():
    assert Scale(0.5, 1.0, 2.0)(math.e**2) == pytest.approx(2 * math.e * 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.fractions(min_value=Fraction(1, 100), max_value=Fraction(49, 100)))
def test_property_classifier_threshold(q, theta):
    # polynomial exponent (1/q - 2) theta + 1/(2q) changes sign at 1/(2(2q - 1));
    # at the threshold itself the log factor still grows
    regime = scale_classifier(q, Scale(theta))
    assert (regime is Regime.MDP_HOLDS) == (theta <= Fraction(1, 2 * (2 * q - 1)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 7), st.integers(0, 30))
def test_property_recurrence(q, x):
    h = charlier
    assert h(q + 1)(x) == x * h(q)(x - 1) - h(q)(x)
