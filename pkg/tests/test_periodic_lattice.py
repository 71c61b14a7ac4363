from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from toral_recurrence.certify import quotient_dist_sq
from toral_recurrence.errors import CapExceeded, RootOfUnity
from toral_recurrence.exact_linalg import IntegerMatrix, det_exact, shifted_power
from toral_recurrence.periodic_lattice import (
    ball_bound_product, brute_force_periodic, count_in_ball, count_in_ellipsoid, count_periodic,
    enumerate_periodic, iter_periodic_chunks, periodic_set,
)
from toral_recurrence.recurrence_geometry import ellipsoid
from toral_recurrence.spectrum_dim import LogRate, RateFunction

M = IntegerMatrix.parse

small_2x2 = st.lists(st.integers(-4, 4), min_size=4, max_size=4).map(
    lambda v: IntegerMatrix(((v[0], v[1]), (v[2], v[3]))))


def _brute_ball(pset, center, r):
    r2 = Fraction(r) ** 2
    return sum(quotient_dist_sq(p, center) <= r2 for p in pset.points())


def test_doubling_period_three():
    ps = enumerate_periodic(M("[[2]]"), 3)
    assert ps.cardinality == 7
    assert ps.points() == [(Fraction(k, 7),) for k in range(7)]


def test_cat_map_counts_are_lucas_like():
    A = M("[[2,1],[1,1]]")
    assert [count_periodic(A, n) for n in range(1, 6)] == [1, 5, 16, 45, 121]


def test_three_dimensional_count():
    A = M("[[2,1,0],[1,3,1],[0,1,4]]")
    ps = enumerate_periodic(A, 3)
    assert ps.cardinality == 2834 == len(ps.numerators)
    assert len({tuple(r) for r in ps.numerators.tolist()}) == 2834


def test_root_of_unity_rejected():
    with pytest.raises(RootOfUnity):
        count_periodic(M("[[1,1],[0,1]]"), 2)
    with pytest.raises(RootOfUnity):
        count_periodic(M("[[0,-1],[1,0]]"), 4)
    assert count_periodic(M("[[0,-1],[1,0]]"), 1) == 2


def test_cap_exceeded():
    with pytest.raises(CapExceeded) as err:
        enumerate_periodic(M("[[2,0],[0,3]]"), 6, cap=1000)
    assert err.value.exit_code == 3


def test_count_only_set_does_not_enumerate():
    ps = periodic_set(M("[[3,1],[1,2]]"), 40)
    assert not ps.enumerated
    assert ps.cardinality == abs(det_exact(shifted_power(M("[[3,1],[1,2]]"), 40)))


def test_points_are_canonical_and_sorted():
    ps = enumerate_periodic(M("[[4,1],[0,2]]"), 3)
    pts = ps.points()
    assert pts == sorted(pts)
    assert all(0 <= v < 1 for p in pts for v in p)


def test_ball_count_doubling_example():
    ps = enumerate_periodic(M("[[2]]"), 3)
    bc = count_in_ball(ps, (Fraction(0),), Fraction(3, 10))
    assert bc.count == 5  # 0, 1/7, 2/7, 5/7, 6/7


def test_ball_bound_product_skips_small_factors():
    assert ball_bound_product([3, 10], Fraction(1, 4)) == 3  # only 10/4 > 1, ceil 5/2 = 3
    assert ball_bound_product([3, 10], Fraction(1, 2)) == 2 * 5


def test_ellipsoid_count_interval_example():
    A = M("[[2]]")
    rate = RateFunction.exponential(LogRate(8))
    ec = count_in_ellipsoid(enumerate_periodic(A, 6), ellipsoid(A, 1, rate, (Fraction(0),)))
    # k/63 with |k/63| < 1/8 mod 1: k in -7..7
    assert ec.count == 15
    assert ec.expected == pytest.approx(63 / 8)


def test_streamed_chunks_match_enumeration():
    A = M("[[3,1],[1,2]]")
    ps = enumerate_periodic(A, 5)
    streamed = set()
    for X, L in iter_periodic_chunks(A, 5, chunk=100):
        streamed |= {tuple(Fraction(int(v), L) for v in row) for row in X}
    assert streamed == set(ps.points())


@settings(max_examples=40, deadline=None)
@given(small_2x2, st.integers(1, 3))
def test_snf_enumeration_matches_brute_force(A, n):
    H = abs(det_exact(shifted_power(A, n)))
    assume(0 < H <= 600)
    ps = enumerate_periodic(A, n)
    assert ps.cardinality == H
    assert set(ps.points()) == brute_force_periodic(A, n)


@settings(max_examples=40, deadline=None)
@given(small_2x2, st.integers(1, 3))
def test_periodic_set_is_invariant(A, n):
    H = abs(det_exact(shifted_power(A, n)))
    assume(0 < H <= 2000)
    pts = set(enumerate_periodic(A, n).points())
    image = {tuple(v - (v.numerator // v.denominator) for v in A.apply(p)) for p in pts}
    assert image <= pts


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 999), st.integers(0, 999), st.integers(5, 45))
def test_ball_count_matches_direct_scan(a, b, pct):
    ps = enumerate_periodic(M("[[3,1],[1,2]]"), 4)
    c = (Fraction(a, 1000), Fraction(b, 1000))
    r = Fraction(pct, 100)
    bc = count_in_ball(ps, c, r)
    assert bc.count == _brute_ball(ps, c, r)
    assert bc.within_bound


def test_ball_count_ratio_near_area():
    ps = enumerate_periodic(M("[[3,1],[1,2]]"), 8)
    rng = np.random.default_rng(0)
    for _ in range(5):
        c = tuple(Fraction(int(v), 1 << 16) for v in rng.integers(0, 1 << 16, 2))
        bc = count_in_ball(ps, c, Fraction(1, 4))
        assert bc.scale_condition
        assert bc.ratio == pytest.approx(np.pi, rel=0.02)
