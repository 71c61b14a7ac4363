"""Conjugating a rationally diagonalizable toral map to a diagonal one.

If ``A`` has integer eigenvalues and a rational eigenbasis, the integer matrix
``P~`` built from left eigenvectors satisfies ``P~ A = D P~``. The induced map
``f(x) = P~ x mod 1`` then intertwines ``T`` with ``x -> Dx mod 1``, and because
``f`` is linear with bounded singular values it does not change Hausdorff dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .certify import frac, is_pos_semidef, sigma_max_sq_upper, sigma_min_sq_lower, sqrt_lower, sqrt_upper
from .errors import NonIntegerEigenvalues, NotDiagonalizableOverQ
from .exact_linalg import IntegerMatrix, RationalMatrix, _integer_roots, char_poly, nullspace
from .spectrum_dim import DimensionResult, Spectrum, dim_rational_diagonal


@dataclass(frozen=True)
class ConjugacyData:
    P: RationalMatrix
    P_tilde: IntegerMatrix
    beta: int
    D: IntegerMatrix
    e_min: Fraction  # certified lower bound on the smallest singular value of P~
    e_max: Fraction  # certified upper bound on the largest

    def to_json(self) -> dict:
        return {
            "P_tilde": self.P_tilde.to_list(),
            "beta": self.beta,
            "D": [self.D.rows[i][i] for i in range(self.D.dim)],
            "e_min": float(self.e_min),
            "e_max": float(self.e_max),
        }


def _integer_eigenvalues(A: IntegerMatrix) -> list:
    coeffs = [Fraction(c) for c in char_poly(A)]
    roots = _integer_roots(coeffs)
    if roots is None:
        raise NonIntegerEigenvalues(f"characteristic polynomial {char_poly(A)} has non-integer roots")
    return roots


def rational_diagonalize(A: IntegerMatrix) -> ConjugacyData:
    """Exact ``P~`` and ``D`` with ``P~ A = D P~``; rows of ``P`` are left eigenvectors.

    Each eigenvector is scaled so its first nonzero entry is 1; ``D`` lists the
    eigenvalues by ascending modulus (ties by value).
    """
    d = A.dim
    eig = _integer_eigenvalues(A)
    distinct = sorted(set(eig), key=lambda v: (abs(v), v))
    rows, diag = [], []
    for lam in distinct:
        mult = eig.count(lam)
        # left eigenvectors of A are null vectors of (A - lam I)^T
        shifted = [[Fraction(A.rows[j][i] - (lam if i == j else 0)) for j in range(d)] for i in range(d)]
        basis = nullspace(shifted)
        if len(basis) < mult:
            raise NotDiagonalizableOverQ(f"eigenvalue {lam} has a defective eigenspace")
        for v in basis:
            lead = next(x for x in v if x != 0)
            rows.append([x / lead for x in v])
            diag.append(lam)
    P = RationalMatrix(tuple(tuple(r) for r in rows))
    beta = math.lcm(*(x.denominator for r in rows for x in r))
    P_tilde = IntegerMatrix(tuple(tuple(int(x * beta) for x in r) for r in rows))
    D = IntegerMatrix.diag(diag)
    if (P_tilde @ A).rows != (D @ P_tilde).rows:
        raise AssertionError("conjugation identity failed")
    G = (P_tilde.transpose() @ P_tilde).rows
    if all(G[i][j] == 0 for i in range(d) for j in range(d) if i != j):
        # orthogonal columns: the singular values are exactly sqrt(G_ii)
        smin2 = Fraction(min(G[i][i] for i in range(d)))
        smax2 = Fraction(max(G[i][i] for i in range(d)))
    else:
        smin2 = sigma_min_sq_lower(P_tilde.rows)
        smax2 = sigma_max_sq_upper(P_tilde.rows)
    return ConjugacyData(P, P_tilde, beta, D, sqrt_lower(smin2), sqrt_upper(smax2))


def conjugation_holds(cd: ConjugacyData, A: IntegerMatrix) -> bool:
    """``A = P~^{-1} D P~`` in exact rational arithmetic."""
    Pt = cd.P_tilde.to_rational()
    return (Pt.inverse() @ cd.D.to_rational() @ Pt).rows == A.to_rational().rows


def _mod1(v):
    return tuple(x - math.floor(x) for x in v)


@dataclass(frozen=True)
class CommutationReport:
    samples: int
    failures: tuple

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self):
        return {"commutation_samples": self.samples,
                "failures": [[str(x) for x in p] for p in self.failures]}


def commutation_check(cd: ConjugacyData, A: IntegerMatrix, samples, rng=None,
                      max_denominator: int = 10 ** 4) -> CommutationReport:
    """``f(Tx) = D f(x)`` exactly on rational points, with ``f(x) = P~ x mod 1``.

    ``samples`` is either an iterable of points or a count of random rationals
    drawn from ``rng`` with denominators up to ``max_denominator``.
    """
    if isinstance(samples, int):
        rng = rng or np.random.default_rng(0)
        pts = []
        for _ in range(samples):
            q = int(rng.integers(1, max_denominator + 1))
            pts.append(tuple(Fraction(int(rng.integers(0, q)), q) for _ in range(A.dim)))
    else:
        pts = [tuple(frac(v) for v in p) for p in samples]
    fails = []
    for x in pts:
        lhs = _mod1(cd.P_tilde.apply(_mod1(A.apply(x))))
        rhs = _mod1(cd.D.apply(_mod1(cd.P_tilde.apply(x))))
        if lhs != rhs:
            fails.append(x)
    return CommutationReport(len(pts), tuple(fails))


@dataclass(frozen=True)
class SandwichRow:
    r: Fraction
    inner: bool  # B(0, e_min r) inside P~ B(0, r)
    outer: bool  # P~ B(0, r) inside B(0, e_max r)
    inner_exp_d: bool  # same with e_min^d
    outer_exp_d: bool  # same with e_max^d

    def to_json(self):
        return {"r": float(self.r), "inner": self.inner, "outer": self.outer,
                "inner_exp_d": self.inner_exp_d, "outer_exp_d": self.outer_exp_d}


def _gram(Pt):
    n = len(Pt)
    return [[sum(Pt[k][i] * Pt[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def _image_contains_ball(Pt, s2) -> bool:
    """``P~ B(0, r)`` contains ``B(0, s r)`` iff ``P~^T P~ - s^2 I`` is positive semidefinite."""
    G = _gram(Pt)
    return is_pos_semidef([[G[i][j] - (s2 if i == j else 0) for j in range(len(G))] for i in range(len(G))])


def _image_inside_ball(Pt, s2) -> bool:
    """``P~ B(0, r)`` lies in ``B(0, s r)`` iff ``s^2 I - P~^T P~`` is positive semidefinite."""
    G = _gram(Pt)
    return is_pos_semidef([[(s2 if i == j else 0) - G[i][j] for j in range(len(G))] for i in range(len(G))])


def lipschitz_sandwich(cd: ConjugacyData, radii) -> tuple:
    """``B(0, e r) <= P~ B(0, r) <= B(0, E r)`` with exponent 1 and with exponent d.

    Both inclusions are scale invariant, so each radius gives the same verdict;
    the rows are still reported per radius.
    """
    Pt = [[Fraction(v) for v in row] for row in cd.P_tilde.rows]
    d = cd.P_tilde.dim
    lo1, hi1 = cd.e_min ** 2, cd.e_max ** 2
    lod, hid = cd.e_min ** (2 * d), cd.e_max ** (2 * d)
    inner, outer = _image_contains_ball(Pt, lo1), _image_inside_ball(Pt, hi1)
    inner_d, outer_d = _image_contains_ball(Pt, lod), _image_inside_ball(Pt, hid)
    out = []
    for r in radii:
        r = frac(r)
        if not 0 < r < Fraction(1, 2):
            raise ValueError("radii must lie in (0, 1/2)")
        out.append(SandwichRow(r, inner, outer, inner_d, outer_d))
    return tuple(out)


def transported_dimension(A: IntegerMatrix, alpha) -> DimensionResult:
    """The rational-diagonal formula on ``|D|``; valid for ``A`` since the conjugacy is bi-Lipschitz."""
    cd = rational_diagonalize(A)
    spec = Spectrum.from_values([cd.D.rows[i][i] for i in range(cd.D.dim)])
    return dim_rational_diagonal(spec, alpha, hypotheses_verified=True)
