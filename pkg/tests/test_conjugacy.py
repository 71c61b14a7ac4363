from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toral_recurrence.conjugacy import (
    commutation_check, conjugation_holds, lipschitz_sandwich, rational_diagonalize, transported_dimension,
)
from toral_recurrence.errors import NonIntegerEigenvalues, NotDiagonalizableOverQ
from toral_recurrence.exact_linalg import IntegerMatrix
from toral_recurrence.spectrum_dim import LogRate, Spectrum, dim_rational_diagonal

M = IntegerMatrix.parse


def _unimodular(ops):
    """Product of elementary integer shears; determinant 1."""
    U = [[1, 0], [0, 1]]
    for which, k in ops:
        E = [[1, k], [0, 1]] if which else [[1, 0], [k, 1]]
        U = [[sum(U[i][t] * E[t][j] for t in range(2)) for j in range(2)] for i in range(2)]
    return IntegerMatrix(tuple(tuple(r) for r in U))


conjugated = st.tuples(
    st.lists(st.tuples(st.booleans(), st.integers(-3, 3)), min_size=1, max_size=4),
    st.integers(2, 9).flatmap(lambda m: st.sampled_from([m, -m])),
    st.integers(2, 9).flatmap(lambda m: st.sampled_from([m, -m])),
)


def _build(ops, a, b):
    U = _unimodular(ops)
    Ui = U.to_rational().inverse().to_integer()
    return Ui @ IntegerMatrix.diag([a, b]) @ U


def test_upper_triangular_frozen():
    cd = rational_diagonalize(M("[[4,1],[0,2]]"))
    assert cd.P_tilde.to_list() == [[0, 2], [2, 1]]
    assert cd.beta == 2
    assert [cd.D.rows[i][i] for i in range(2)] == [2, 4]
    assert conjugation_holds(cd, M("[[4,1],[0,2]]"))


def test_diagonal_is_its_own_conjugate():
    cd = rational_diagonalize(M("[[2,0],[0,3]]"))
    assert cd.P_tilde.to_list() == [[1, 0], [0, 1]]
    assert cd.e_min == cd.e_max == 1


def test_three_by_three():
    A = M("[[2,1,0],[0,3,1],[0,0,5]]")
    cd = rational_diagonalize(A)
    assert conjugation_holds(cd, A)
    assert [cd.D.rows[i][i] for i in range(3)] == [2, 3, 5]


def test_rejects_irrational_and_defective():
    with pytest.raises(NonIntegerEigenvalues):
        rational_diagonalize(M("[[3,1],[1,2]]"))
    with pytest.raises(NotDiagonalizableOverQ):
        rational_diagonalize(M("[[2,1],[0,2]]"))


def test_commutation_on_given_points():
    A = M("[[10,-6],[3,1]]")
    cd = rational_diagonalize(A)
    pts = [(Fraction(1, 3), Fraction(2, 7)), (Fraction(0), Fraction(5, 11)), (0.25, 0.5)]
    assert commutation_check(cd, A, pts).passed


def test_sandwich_exponent_one_and_d():
    cd = rational_diagonalize(M("[[5,3],[3,5]]"))
    rows = lipschitz_sandwich(cd, [Fraction(1, 100), Fraction(1, 4)])
    assert all(r.inner and r.outer for r in rows)
    assert all(r.outer_exp_d for r in rows)
    with pytest.raises(ValueError):
        lipschitz_sandwich(cd, [Fraction(1, 2)])


def test_transported_dimension_matches_diagonal():
    A = M("[[2,0],[0,8]]")
    B = _build([(True, 1), (False, -2)], 2, 8)
    assert transported_dimension(A, LogRate(2)).value == pytest.approx(1.5)
    assert transported_dimension(B, LogRate(2)).value == pytest.approx(1.5)


@settings(max_examples=40, deadline=None)
@given(conjugated)
def test_conjugation_properties(data):
    ops, a, b = data
    A = _build(ops, a, b)
    cd = rational_diagonalize(A)
    assert conjugation_holds(cd, A)
    assert sorted(abs(cd.D.rows[i][i]) for i in range(2)) == sorted([abs(a), abs(b)])
    sv = np.linalg.svd(cd.P_tilde.to_numpy().astype(float), compute_uv=False)
    assert float(cd.e_min) <= sv.min() * (1 + 1e-12)
    assert float(cd.e_max) >= sv.max() * (1 - 1e-12)
    assert 0 < cd.e_min <= cd.e_max
    assert commutation_check(cd, A, 30, np.random.default_rng(0)).passed
    rows = lipschitz_sandwich(cd, [Fraction(1, 10)])
    assert rows[0].inner and rows[0].outer


@settings(max_examples=30, deadline=None)
@given(conjugated, st.integers(1, 20))
def test_transported_dimension_is_conjugacy_invariant(data, q):
    ops, a, b = data
    A = _build(ops, a, b)
    spec = Spectrum.from_values([a, b])
    expected = dim_rational_diagonal(spec, LogRate(q), hypotheses_verified=True).value
    assert transported_dimension(A, LogRate(q)).value == pytest.approx(expected, abs=1e-14)
