import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from toral_recurrence.errors import InvalidSpectrum
from toral_recurrence.exact_linalg import IntegerMatrix, eigen_moduli
from toral_recurrence.spectrum_dim import (
    LogRate, RateFunction, Spectrum, alpha_threshold, dim_equal_moduli, dim_general, dim_rational_diagonal, k_set,
)

GOLDEN = IntegerMatrix.parse("[[3,1],[1,2]]")

# frozen from an independent computer-algebra evaluation
GOLDEN_THRESHOLD = 0.9624236501192068949955178
GOLDEN_DIM = {1: 1.125082869358347821442267, 2: 0.6926761234566836271196221}

spectra = st.lists(st.integers(2, 40).flatmap(lambda m: st.sampled_from([m, -m])), min_size=1, max_size=6).map(
    Spectrum.from_values)
alphas = st.floats(0, 8, allow_nan=False)


def test_golden_threshold():
    assert alpha_threshold(eigen_moduli(GOLDEN)) == pytest.approx(GOLDEN_THRESHOLD, rel=1e-14)


@pytest.mark.parametrize("alpha", [1, 2])
def test_golden_dimension_frozen(alpha):
    res = dim_general(eigen_moduli(GOLDEN), alpha)
    assert res.value == pytest.approx(GOLDEN_DIM[alpha], rel=1e-14)
    assert res.label == "exact"


def test_two_four_at_log8_is_three_quarters():
    res = dim_general(Spectrum.from_values([2, 4]), LogRate(8))
    assert res.value == pytest.approx(0.75, abs=1e-15)
    assert res.argmin_j == 1
    assert res.per_j_values == pytest.approx((0.75, 0.8), abs=1e-15)


def test_below_threshold_is_labelled_upper_bound():
    spec = Spectrum.from_values([2, 16])
    assert dim_general(spec, LogRate(2)).label == "upper_bound"
    assert dim_rational_diagonal(spec, LogRate(2)).label == "upper_bound"
    assert dim_rational_diagonal(spec, LogRate(2), hypotheses_verified=True).label == "exact"


def test_correction_lowers_the_value_below_threshold():
    # 2 and 16 with alpha = ln 2: K(1) = {2} since ln 16 > ln 2 + ln 2
    spec = Spectrum.from_values([2, 16])
    a = LogRate(2)
    assert k_set(spec, a, 1) == frozenset({2})
    assert k_set(spec, a, 2) == frozenset()
    l2, l16 = math.log(2), math.log(16)
    j1 = (l2 + (2 * l2 - l16) + l16) / (2 * l2)
    j2 = 2 * l16 / (l16 + l2)
    got = dim_rational_diagonal(spec, a)
    assert got.per_j_values == pytest.approx((j1, j2), rel=1e-14)
    assert got.value < dim_general(spec, a).value


def test_k_set_boundary_is_strict():
    # log 8 = log 2 + log 4 exactly, so 3 is not in K(1) at alpha = ln 4
    spec = Spectrum.from_values([2, 3, 8])
    assert k_set(spec, LogRate(4), 1) == frozenset()
    assert k_set(spec, LogRate(Fraction(7, 2)), 1) == frozenset({3})


def test_infinite_alpha_gives_zero():
    spec = Spectrum.from_values([2, 3])
    assert dim_general(spec, math.inf).value == 0
    assert dim_rational_diagonal(spec, math.inf).value == 0
    assert dim_equal_moduli(2, 3, math.inf) == 0


def test_invalid_spectrum_rejected():
    with pytest.raises(InvalidSpectrum):
        dim_general(Spectrum.from_values([1, 3]), 1.0)
    with pytest.raises(InvalidSpectrum):
        dim_equal_moduli(2, 1, 1.0)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        dim_general(Spectrum.from_values([2]), -0.5)
    with pytest.raises(ValueError):
        LogRate(Fraction(1, 2))


def test_rate_function_exact_for_log_rates():
    rate = RateFunction.exponential(LogRate(3))
    assert rate.psi(4) == Fraction(1, 81)
    assert rate.log_psi(4) == pytest.approx(-4 * math.log(3))


def test_rate_function_table():
    rate = RateFunction.from_table([Fraction(1, 4 ** n) for n in range(1, 9)])
    assert rate.kind == "table" and rate.horizon == 8
    assert rate.lower_order == pytest.approx(math.log(4))
    with pytest.raises(ValueError):
        rate.psi(9)
    with pytest.raises(ValueError):
        RateFunction.from_table([Fraction(1, 2), Fraction(1, 2)])


@settings(max_examples=80, deadline=None)
@given(spectra, alphas)
def test_value_in_unit_range(spec, alpha):
    res = dim_general(spec, alpha)
    assert 0 <= res.value <= spec.d + 1e-12
    assert res.value == pytest.approx(min(res.per_j_values), abs=1e-15)


@settings(max_examples=80, deadline=None)
@given(spectra, alphas, alphas)
def test_monotone_in_alpha(spec, a, b):
    lo, hi = sorted((a, b))
    assert dim_general(spec, hi).value <= dim_general(spec, lo).value + 1e-12


@settings(max_examples=80, deadline=None)
@given(spectra, alphas)
def test_rational_formula_never_exceeds_general(spec, alpha):
    assert dim_rational_diagonal(spec, alpha).value <= dim_general(spec, alpha).value + 1e-12


@settings(max_examples=80, deadline=None)
@given(spectra, st.integers(1, 5), st.integers(2, 3))
def test_power_scaling(spec, q, t):
    a = LogRate(q)
    assert dim_general(spec.powered(t), a.scaled(t)).value == pytest.approx(dim_general(spec, a).value, abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(spectra, st.integers(100, 500))
def test_formulas_agree_above_threshold(spec, pct):
    mods = [abs(v) for v in spec.exact]
    a = LogRate(Fraction(mods[-1], mods[0]) * Fraction(pct, 100))
    assert dim_rational_diagonal(spec, a).value == pytest.approx(dim_general(spec, a).value, abs=1e-12)
    assert all(not k for k in dim_rational_diagonal(spec, a).k_sets)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(2, 30), alphas)
def test_equal_moduli_formula(d, lam, alpha):
    spec = Spectrum.from_values([lam] * d)
    assert dim_equal_moduli(d, lam, alpha) == pytest.approx(dim_general(spec, alpha).value, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(spectra)
def test_alpha_zero_gives_full_dimension(spec):
    assume(spec.d >= 1)
    assert dim_general(spec, 0).value == pytest.approx(spec.d, abs=1e-12)
    assert dim_rational_diagonal(spec, 0).value == pytest.approx(spec.d, abs=1e-12)
