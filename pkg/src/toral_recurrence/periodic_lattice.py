"""Periodic points of ``x -> Ax mod 1`` and counts of them in balls and ellipsoids.

The period-n points are the torus image of ``(A^n - I)^{-1} Z^d``. With the
Smith form ``A^n - I = U S V`` they are exactly ``V^{-1} (k_1/s_1, ..., k_d/s_d)``
for ``0 <= k_i < s_i``, so every point is stored as an integer numerator row
over the common denominator ``s_d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .certify import within_mask
from .errors import CapExceeded, RootOfUnity
from .exact_linalg import IntegerMatrix, det_exact, eigen_moduli, shifted_power, smith_normal_form

DEFAULT_CAP = 2_000_000


def count_periodic(A: IntegerMatrix, n: int) -> int:
    """``H_n = |det(A^n - I)|``; raises RootOfUnity when it vanishes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    H = abs(det_exact(shifted_power(A, n)))
    if H == 0:
        raise RootOfUnity(f"A^{n} has eigenvalue 1: infinitely many period-{n} points")
    return H


@dataclass(frozen=True)
class _Lattice:
    factors: tuple
    denominator: int
    steps: tuple
    transform: tuple  # V^{-1} reduced mod denominator
    big: bool


def _lattice(A, n):
    M = shifted_power(A, n)
    snf = smith_normal_form(M)
    s = snf.invariant_factors
    L = s[-1]
    R = tuple(tuple(x % L for x in row) for row in snf.V_inv.rows)
    return _Lattice(s, L, tuple(L // f for f in s), R, A.dim * L * L >= 2 ** 62)


def _numerators(lat, flat):
    ks = np.unravel_index(flat, lat.factors)
    d = len(lat.factors)
    L = lat.denominator
    if lat.big:
        cols = np.stack([k.astype(object) * lat.steps[i] for i, k in enumerate(ks)], axis=1)
        R = np.array(lat.transform, dtype=object)
    else:
        cols = np.stack([k.astype(np.int64) * lat.steps[i] for i, k in enumerate(ks)], axis=1)
        R = np.array(lat.transform, dtype=np.int64)
    out = np.zeros((len(flat), d), dtype=cols.dtype)
    for j in range(d):  # one column at a time keeps int64 products below L^2
        out = (out + np.outer(cols[:, j], R[:, j])) % L
    return out


def iter_periodic_chunks(A: IntegerMatrix, n: int, chunk: int = 1 << 16):
    """Stream ``(numerators, denominator)`` blocks covering all period-n points."""
    H = count_periodic(A, n)
    lat = _lattice(A, n)
    for start in range(0, H, chunk):
        flat = np.arange(start, min(H, start + chunk), dtype=np.int64)
        yield _numerators(lat, flat), lat.denominator


@dataclass(frozen=True, eq=False)
class PeriodicSet:
    """Period-n points; ``numerators[i] / denominator`` is a point of [0,1)^d."""

    matrix: IntegerMatrix
    period: int
    cardinality: int
    denominator: int | None = None
    numerators: np.ndarray | None = None

    @property
    def enumerated(self) -> bool:
        return self.numerators is not None

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def points(self) -> list:
        if not self.enumerated:
            raise ValueError("points were not enumerated")
        L = self.denominator
        return [tuple(Fraction(int(v), L) for v in row) for row in self.numerators]

    def chunks(self, chunk: int = 1 << 16):
        if self.enumerated:
            for s in range(0, self.cardinality, chunk):
                yield self.numerators[s:s + chunk], self.denominator
        else:
            yield from iter_periodic_chunks(self.matrix, self.period, chunk)

    def as_float(self) -> np.ndarray:
        return self.numerators.astype(float) / float(self.denominator)

    def to_json(self, with_points: bool = True) -> dict:
        out = {"period": self.period, "count": str(self.cardinality)}
        if with_points and self.enumerated:
            out["points"] = [[_frac_str(p) for p in pt] for pt in self.points()]
        return out


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def periodic_set(A: IntegerMatrix, n: int) -> PeriodicSet:
    """Counted but not enumerated."""
    return PeriodicSet(A, n, count_periodic(A, n))


def enumerate_periodic(A: IntegerMatrix, n: int, cap: int = DEFAULT_CAP) -> PeriodicSet:
    """All period-n points as exact rationals, sorted lexicographically."""
    H = count_periodic(A, n)
    if H > cap:
        raise CapExceeded(H, cap)
    lat = _lattice(A, n)
    X = _numerators(lat, np.arange(H, dtype=np.int64))
    order = np.lexsort(X.T[::-1])
    return PeriodicSet(A, n, H, lat.denominator, X[order])


def brute_force_periodic(A: IntegerMatrix, n: int) -> set:
    """Independent oracle: scan the grid ``(1/H) Z^d`` for solutions of ``(A^n - I) x in Z^d``."""
    M = shifted_power(A, n)
    H = count_periodic(A, n)
    d = A.dim
    found = set()
    if d == 1:
        m = M.rows[0][0]
        for j in range(H):
            if (m * j) % H == 0:
                found.add((Fraction(j, H),))
        return found
    if d != 2:
        raise ValueError("brute force oracle supports d <= 2")
    (a, b), (c, e) = M.rows
    small = 2 * H * max(abs(a), abs(b), abs(c), abs(e)) < 2 ** 62
    j2 = np.arange(H, dtype=np.int64 if small else object)
    for j1 in range(H):
        ok = ((a * j1 + b * j2) % H == 0) & ((c * j1 + e * j2) % H == 0)
        for k in np.nonzero(ok.astype(bool))[0]:
            found.add((Fraction(j1, H), Fraction(int(k), H)))
    return found


@dataclass(frozen=True)
class BallCount:
    count: int
    bound_product: int
    ratio: float | None  # count / (r^d H_n), reported when r (lambda_1^n - 1) > 1
    scale_condition: bool
    dim: int = 1

    @property
    def constant(self) -> Fraction:
        """Smallest C with ``count <= C * bound_product``."""
        return Fraction(self.count, self.bound_product)

    @property
    def within_bound(self) -> bool:
        """``count <= 8^d * bound_product``."""
        return self.count <= 8 ** self.dim * self.bound_product

    def to_json(self):
        return {"count": str(self.count), "bound_product": str(self.bound_product),
                "constant": float(self.constant), "ratio": self.ratio,
                "scale_condition": self.scale_condition}


def ball_bound_product(growth, r) -> int:
    """``prod_{j : g_j r > 1} ceil(g_j r)`` with ``g_j = |lambda_j^n - 1|``."""
    out = 1
    for g in growth:
        t = Fraction(g) * Fraction(r)
        if t > 1:
            out *= math.ceil(t)
    return out


def count_in_ball(pset: PeriodicSet, center, r) -> BallCount:
    """Exact number of period-n points at quotient distance <= r from ``center``."""
    total = 0
    for X, L in pset.chunks():
        total += int(within_mask(X, L, center, r, closed=True).sum())
    spec = eigen_moduli(pset.matrix)
    growth = spec.growth(pset.period)
    prod = ball_bound_product(growth, r)
    cond = Fraction(min(growth)) * Fraction(r) > 1
    ratio = total / (float(r) ** pset.dim * pset.cardinality) if cond else None
    return BallCount(total, prod, ratio, cond, pset.dim)


@dataclass(frozen=True)
class EllipsoidCount:
    count: int
    expected: float
    ratio: float
    hypothesis_met: bool

    def to_json(self):
        return {"count": str(self.count), "expected": self.expected, "ratio": self.ratio,
                "hypothesis_met": self.hypothesis_met}


def count_in_ellipsoid(pset_m: PeriodicSet, ell) -> EllipsoidCount:
    """Period-m points inside a degree-n ellipsoid, against ``psi(n)^d H_m / H_n``.

    ``hypothesis_met`` records the scale condition
    ``l_{n,d} (lambda_1^m - 1) / sqrt(d) > 1``; the count is returned either way.
    """
    A = pset_m.matrix
    d = A.dim
    n, m = ell.degree, pset_m.period
    total = 0
    for X, L in pset_m.chunks():
        total += int(within_mask(X, L, ell.center, ell.psi, M=ell.shape.rows, translates=True).sum())
    spec = eigen_moduli(A)
    gn, gm = spec.growth(n), spec.growth(m)
    psi = float(ell.psi)
    ell_small = 2 * psi / float(max(gn))
    hyp = ell_small * float(min(gm)) / math.sqrt(d) > 1
    Hn = count_periodic(A, n)
    expected = psi ** d * pset_m.cardinality / Hn
    return EllipsoidCount(total, expected, total / expected, hyp)
