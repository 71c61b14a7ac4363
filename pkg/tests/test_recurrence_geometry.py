import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from toral_recurrence.errors import CapExceeded, HypothesisViolated, ScaleTooFine
from toral_recurrence.exact_linalg import IntegerMatrix, det_exact, shifted_power
from toral_recurrence.recurrence_geometry import (
    boshernitzan_batch, boshernitzan_statistic, box_count_dimension, covering_count, decompose_Rn,
    dynamical_membership, ellipsoid, ellipsoid_min_distance, membership, orbit_record, recurrence_indices,
    semi_axes, semi_axes_sweep, torus_region, upper_bound_sum,
)
from toral_recurrence.spectrum_dim import LogRate, RateFunction, Spectrum, dim_general

M = IntegerMatrix.parse
GOLDEN = M("[[3,1],[1,2]]")

# frozen: psi / singular values of A^5 - I for the golden matrix, psi = 1/100
GOLDEN_AXES_N5 = (0.002474847448645426162560022, 0.00001615614991514960713210164)

rationals = st.builds(Fraction, st.integers(0, 999), st.integers(1, 1000))
points2 = st.tuples(rationals, rationals)
hyperbolic_sym = st.tuples(st.integers(2, 6), st.integers(-3, 3), st.integers(2, 6)).map(
    lambda t: IntegerMatrix(((t[0], t[1]), (t[1], t[2]))))


def test_membership_examples():
    A = M("[[2]]")
    assert membership((Fraction(1, 7),), A, 3, Fraction(1, 1000))
    assert not membership((Fraction(1, 2),), A, 1, Fraction(1, 10))
    with pytest.raises(HypothesisViolated):
        membership((Fraction(1, 3),), A, 1, Fraction(1, 2))


def test_periodic_points_are_members():
    fam = decompose_Rn(GOLDEN, 3, Fraction(1, 100))
    for c in fam.points.points():
        assert membership(c, GOLDEN, 3, Fraction(1, 10 ** 9))


def test_decompose_doubling_example():
    fam = decompose_Rn(M("[[2]]"), 2, Fraction(6, 100))
    assert len(fam) == 3
    assert fam.points.points() == [(Fraction(0),), (Fraction(1, 3),), (Fraction(2, 3),)]
    assert fam.semi_axes_exact == pytest.approx((0.02,))


def test_decompose_rejects_large_radius_and_cap():
    with pytest.raises(HypothesisViolated):
        decompose_Rn(M("[[2]]"), 1, Fraction(1, 2))
    with pytest.raises(CapExceeded):
        decompose_Rn(M("[[2,0],[0,3]]"), 6, Fraction(1, 100), cap=100)


def test_semi_axes_frozen():
    rep = semi_axes(GOLDEN, 5, Fraction(1, 100))
    assert rep.exact == pytest.approx(GOLDEN_AXES_N5, rel=1e-13)
    assert list(rep.exact) == sorted(rep.exact, reverse=True)


def test_semi_axes_diagonal_ratios_are_one():
    for n in range(1, 15):
        assert semi_axes(M("[[2,0],[0,5]]"), n, Fraction(1, 10)).ratios == pytest.approx((1, 1), rel=1e-14)


def test_semi_axes_jordan_block_grows_polynomially():
    sw = semi_axes_sweep(M("[[2,1],[0,2]]"), Fraction(1, 10), range(2, 16))
    assert 0 < sw.exponent <= 1.5
    assert sw.max_log_ratio[-1] > sw.max_log_ratio[0]


@settings(max_examples=25, deadline=None)
@given(hyperbolic_sym, st.integers(1, 12))
def test_semi_axes_symmetric_matrices_match_model(A, n):
    assume(det_exact(A) != 0 and det_exact(shifted_power(A, n)) != 0)
    assert semi_axes(A, n, Fraction(1, 10)).ratios == pytest.approx([1] * 2, rel=1e-9)


def test_min_distance_doubling_example():
    fam = decompose_Rn(M("[[2]]"), 2, Fraction(6, 100))
    md = ellipsoid_min_distance(fam)
    assert md.distance == pytest.approx(1 / 3 - 0.04, rel=1e-10)
    assert md.model_bound == pytest.approx(2 * (1 / 3 - 0.06) / 3)
    assert md.holds


def test_min_distance_single_ellipsoid():
    fam = decompose_Rn(M("[[2]]"), 1, Fraction(1, 8))
    assert ellipsoid_min_distance(fam).distance == math.inf


def test_min_distance_is_a_lower_bound_in_the_plane():
    # compare with a dense boundary sampling of two neighbouring ellipses
    fam = decompose_Rn(GOLDEN, 2, Fraction(1, 16))
    md = ellipsoid_min_distance(fam)
    M2 = np.linalg.inv(fam.shape.to_numpy().astype(float))
    t = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
    ring = (M2 @ np.stack([np.cos(t), np.sin(t)]) / 16).T
    pts = fam.points.as_float()
    best = math.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            off = pts[j] - pts[i]
            off -= np.round(off)
            a = ring
            b = ring + off
            dist = np.min(np.linalg.norm(a[:, None, :] - b[None, ::8, :], axis=2))
            best = min(best, dist)
    assert md.distance <= best + 1e-9
    assert md.holds


def test_family_membership_matches_algebraic_test():
    fam = decompose_Rn(GOLDEN, 3, Fraction(1, 20))
    rng = np.random.default_rng(1)
    for _ in range(300):
        x = tuple(Fraction(int(v), 4096) for v in rng.integers(0, 4096, 2))
        assert fam.contains(x) == membership(x, GOLDEN, 3, Fraction(1, 20))


def test_member_ellipsoid_contains_its_center():
    e = ellipsoid(GOLDEN, 2, Fraction(1, 16), (Fraction(1, 11), Fraction(3, 11)))
    assert e.contains((Fraction(1, 11), Fraction(3, 11)))
    assert e.contains((Fraction(12, 11) - 1, Fraction(3, 11)))


@settings(max_examples=60, deadline=None)
@given(points2, st.integers(1, 4), st.integers(1, 49))
def test_dynamical_equals_algebraic(x, n, pct):
    psi = Fraction(pct, 100)
    assert membership(x, GOLDEN, n, psi) == dynamical_membership(x, GOLDEN, n, psi)


@pytest.mark.parametrize("text,n", [("[[2]]", 4), ("[[3,1],[1,2]]", 3), ("[[2,0],[0,3]]", 2)])
def test_volume_identity(text, n):
    A = M(text)
    psi = Fraction(1, 50)
    fam = decompose_Rn(A, n, psi)
    d = A.dim
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * float(psi) ** d
    assert fam.total_volume() == pytest.approx(ball, rel=1e-10)


def test_covering_count_example():
    cc = covering_count(Spectrum.from_values([2, 4]), 3, Fraction(1, 10), 2)
    assert cc.count == pytest.approx(9)
    assert covering_count(Spectrum.from_values([3, 3]), 5, Fraction(1, 10), 2).count == pytest.approx(1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 30), min_size=2, max_size=4), st.integers(1, 12))
def test_cheapest_cover_index_matches_formula_argmin(vals, q):
    spec = Spectrum.from_values(vals)
    a = LogRate(q)
    res = dim_general(spec, a)
    per = sorted(res.per_j_values)
    assume(len(per) < 2 or per[1] - per[0] > 0.01)
    n = 400
    rate = RateFunction.exponential(a)
    costs = [covering_count(spec, n, rate, k).log_cost(res.value) for k in range(1, spec.d + 1)]
    assert int(np.argmin(costs)) + 1 == res.argmin_j


def test_upper_bound_verdicts_around_formula_value():
    spec = Spectrum.from_values([2, 4])
    rate = RateFunction.exponential(LogRate(8))
    assert upper_bound_sum(spec, rate, 2.0, range(5, 61)).verdict == "converging"
    assert upper_bound_sum(spec, rate, 0.80, range(5, 61)).verdict == "converging"
    assert upper_bound_sum(spec, rate, 0.70, range(5, 61)).verdict == "diverging"
    with pytest.raises(ValueError):
        upper_bound_sum(spec, rate, 2.5, range(5, 10))


def test_recurrence_indices_examples():
    A = M("[[2]]")
    assert recurrence_indices((Fraction(1, 7),), A, Fraction(1, 1000), 12) == [3, 6, 9, 12]
    assert recurrence_indices((Fraction(0),), A, RateFunction.exponential(LogRate(3)), 10) == list(range(1, 11))
    assert recurrence_indices((0.3127,), A, Fraction(1, 2) + 1, 8) == list(range(1, 9))


def test_orbit_distances_in_range():
    rec = orbit_record((Fraction(3, 17), Fraction(5, 19)), GOLDEN, 200)
    assert np.all(rec.distances >= 0) and np.all(rec.distances <= math.sqrt(2) / 2)


def test_boshernitzan_examples():
    A = M("[[2]]")
    assert boshernitzan_statistic((Fraction(0),), A, 1.0, 5).value == 0
    res = boshernitzan_statistic((Fraction(1, 7),), A, 1.0, 10)
    assert res.value == 0 and res.argmin == 3
    with pytest.raises(ValueError):
        boshernitzan_statistic((Fraction(1, 7),), A, 0.0, 10)


def test_boshernitzan_batch_matches_single_orbits():
    A = M("[[2,0],[0,3]]")
    rng = np.random.default_rng(5)
    vals = boshernitzan_batch(A, 2.0, 300, 4, np.random.default_rng(5))
    q = 2 ** 61 - 1
    starts = rng.integers(0, q, size=(4, 2), dtype=np.int64)
    for v, s in zip(vals, starts):
        x = tuple(Fraction(int(k), q) for k in s)
        assert v == pytest.approx(boshernitzan_statistic(x, A, 2.0, 300).value, rel=1e-9, abs=1e-15)


def test_box_count_whole_torus():
    bc = box_count_dimension(torus_region(1), range(2, 12))
    assert bc.slope == pytest.approx(1, abs=0.02)
    assert box_count_dimension(torus_region(2), range(2, 8)).slope == pytest.approx(2, abs=0.02)


def test_box_count_single_interval():
    fam = decompose_Rn(M("[[2]]"), 1, Fraction(1, 8))
    bc = box_count_dimension([fam], range(8, 16))
    assert bc.slope == pytest.approx(1, abs=0.02)


def test_box_count_too_fine():
    with pytest.raises(ScaleTooFine):
        box_count_dimension(torus_region(2), [14])


def _oracle_boxes_1d(fams, s):
    hit = set()
    size = 2 ** s
    for fam in fams:
        rho = Fraction(fam.psi) / abs(fam.shape.rows[0][0])
        for (c,) in fam.points.points():
            for i in range(size):
                lo, hi = Fraction(i, size), Fraction(i + 1, size)
                # the open interval (c - rho, c + rho) mod 1 meets [lo, hi)
                if any(c + k - rho < hi and c + k + rho > lo for k in (-1, 0, 1)):
                    hit.add(i)
    return len(hit)


def test_box_count_matches_interval_oracle():
    A = M("[[2]]")
    rate = RateFunction.exponential(LogRate(2))
    fams = [decompose_Rn(A, n, rate) for n in range(3, 6)]
    bc = box_count_dimension(fams, range(2, 8))
    assert bc.counts == tuple(_oracle_boxes_1d(fams, s) for s in range(2, 8))


def _oracle_boxes_diag(fam, s):
    # axis-aligned ellipses: the box minimum of the quadratic form is at the clamped center
    (a, _), (_, b) = fam.shape.rows
    r2 = Fraction(fam.psi) ** 2
    size = 2 ** s
    hit = set()
    for c in fam.points.points():
        for i in range(size):
            for j in range(size):
                for k in ((x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)):
                    cx, cy = c[0] + k[0], c[1] + k[1]
                    px = min(max(cx, Fraction(i, size)), Fraction(i + 1, size))
                    py = min(max(cy, Fraction(j, size)), Fraction(j + 1, size))
                    if (a * (px - cx)) ** 2 + (b * (py - cy)) ** 2 < r2:
                        hit.add((i, j))
                        break
    return len(hit)


def test_box_count_2d_matches_oracle():
    fam = decompose_Rn(M("[[2,0],[0,3]]"), 1, Fraction(1, 5))
    bc = box_count_dimension([fam], range(1, 5))
    assert bc.counts == tuple(_oracle_boxes_diag(fam, s) for s in range(1, 5))


def test_box_counts_monotone():
    A = M("[[3,1],[1,2]]")
    fams = [decompose_Rn(A, n, Fraction(1, 10)) for n in (2, 3)]
    bc = box_count_dimension(fams, range(2, 9))
    assert all(x <= y for x, y in zip(bc.counts, bc.counts[1:]))
