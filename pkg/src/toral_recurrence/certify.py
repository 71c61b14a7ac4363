"""Rigorous comparisons built from exact rationals.

Floating point is used only to *propose* a number (a singular value, a
multiplier); the proposal is then checked with ``Fraction`` arithmetic, so a
``True`` answer is a proof, not an estimate.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import numpy as np

from .exact_linalg import _det_rational, solve

# extra bits kept by the rational square-root bounds
_SQRT_BITS = 64


def frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def sqrt_upper(q) -> Fraction:
    """A rational ``s >= sqrt(q)`` within ``2**-64`` relative."""
    q = frac(q)
    if q < 0:
        raise ValueError("negative")
    p, r = q.numerator, q.denominator
    scale = 4 ** _SQRT_BITS
    s = math.isqrt(p * r * scale)
    if s * s < p * r * scale:
        s += 1
    return Fraction(s, r * 2 ** _SQRT_BITS)


def sqrt_lower(q) -> Fraction:
    """A rational ``s <= sqrt(q)``."""
    q = frac(q)
    p, r = q.numerator, q.denominator
    return Fraction(math.isqrt(p * r * 4 ** _SQRT_BITS), r * 2 ** _SQRT_BITS)


def centered(v):
    """Representative of a torus coordinate in [-1/2, 1/2]."""
    return v - round(v)


def torus_diff(x, y):
    return tuple(centered(frac(a) - frac(b)) for a, b in zip(x, y))


def norm_sq(v):
    return sum(c * c for c in v)


def quotient_dist_sq(x, y) -> Fraction:
    """Squared quotient distance on the torus, exact for rational input."""
    return norm_sq(torus_diff(x, y))


def is_pos_def(Q) -> bool:
    """Exact positive-definiteness of a symmetric rational matrix (LDL^T pivots)."""
    a = [[frac(x) for x in r] for r in Q]
    n = len(a)
    for k in range(n):
        if a[k][k] <= 0:
            return False
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            if f:
                for j in range(k + 1, n):
                    a[i][j] -= f * a[k][j]
    return True


def is_pos_semidef(Q) -> bool:
    """Exact positive-semidefiniteness: every principal minor is nonnegative."""
    a = [[frac(x) for x in r] for r in Q]
    n = len(a)
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if _det_rational([[a[i][j] for j in idx] for i in idx]) < 0:
            return False
    return True


def gram(B):
    """``B^T B`` in exact arithmetic."""
    d = len(B[0])
    return [[sum(B[k][i] * B[k][j] for k in range(len(B))) for j in range(d)] for i in range(d)]


def _shift(G, tau):
    return [[(tau if i == j else 0) - G[i][j] for j in range(len(G))] for i in range(len(G))]


def sigma_max_sq_upper(B) -> Fraction:
    """Certified rational upper bound on the largest squared singular value of ``B``."""
    G = gram([[frac(x) for x in r] for r in B])
    est = float(np.linalg.norm(np.array(G, dtype=float), 2))
    tau = frac(est * (1 + 1e-12) + 1e-300)
    while not is_pos_def(_shift(G, tau)):
        tau = tau * 2 if tau else Fraction(1, 2 ** 60)
    return tau


def sigma_min_sq_lower(B) -> Fraction:
    """Certified rational lower bound on the smallest squared singular value of ``B``."""
    G = [[frac(x) for x in r] for r in gram([[frac(x) for x in r] for r in B])]
    est = float(np.linalg.svd(np.array(B, dtype=float), compute_uv=False)[-1] ** 2)
    tau = frac(est * (1 - 1e-12))
    neg = lambda t: [[G[i][j] - (t if i == j else 0) for j in range(len(G))] for i in range(len(G))]
    while tau > 0 and not is_pos_def(neg(tau)):
        tau /= 2
        if tau < Fraction(1, 2 ** 200):
            return Fraction(0)
    return max(tau, Fraction(0))


def max_norm_sq_over_ball_upper(a, B, rho):
    """Rigorous upper bound on ``max_{|u| <= rho} |a + B u|^2``.

    Uses the S-lemma dual ``g(tau) = tau rho^2 + |a|^2 + a^T B (tau I - B^T B)^{-1} B^T a``,
    valid for any ``tau`` with ``tau I - B^T B`` positive definite; the
    minimizing ``tau`` is located in floating point and the bound evaluated exactly.
    Returns None if no certified ``tau`` was found.
    """
    a = [frac(x) for x in a]
    B = [[frac(x) for x in r] for r in B]
    rho = frac(rho)
    d = len(a)
    G = gram(B)
    Bta = [sum(B[k][i] * a[k] for k in range(len(a))) for i in range(d)]
    Gf = np.array(G, dtype=float)
    lam, Q = np.linalg.eigh(Gf)
    b = Q.T @ np.array(Bta, dtype=float)
    lmax = lam[-1]
    rf = float(rho)
    # g'(tau) = rho^2 - sum b_i^2 / (tau - lam_i)^2 is increasing on (lmax, inf)
    lo = lmax + max(abs(lmax), 1e-300) * 1e-12
    hi = lmax + max(1.0, lmax) + (np.linalg.norm(b) / rf if rf > 0 else 1.0)
    if rf > 0:
        while rf * rf - np.sum(b * b / (hi - lam) ** 2) < 0:
            hi = lmax + 2 * (hi - lmax)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if rf * rf - np.sum(b * b / (mid - lam) ** 2) < 0:
                lo = mid
            else:
                hi = mid
    tau = frac(hi)
    for _ in range(60):
        Qm = _shift(G, tau)
        if is_pos_def(Qm):
            break
        tau = tau + (tau - frac(lmax)) + Fraction(1, 2 ** 40)
    else:
        return None
    y = solve(Qm, Bta)
    return tau * rho * rho + norm_sq(a) + sum(x * z for x, z in zip(Bta, y))


def unit_translates(d):
    return [np.array(k, dtype=float) for k in product((-1, 0, 1), repeat=d)]


def within_mask(X, L, center, radius, M=None, translates=False, closed=False):
    """Which rows ``x = X/L`` satisfy ``min_k |M (x - center + k)| < radius``.

    ``k`` ranges over the coordinate-wise nearest lift (and, with
    ``translates``, its 3^d neighbours). Floats decide clear cases; anything
    within rounding distance of the boundary is re-decided with Fractions.
    """
    X = np.asarray(X)
    n, d = X.shape
    if n == 0:
        return np.zeros(0, dtype=bool)
    c = [frac(v) for v in center]
    r = frac(radius)
    cf = np.array([float(v) for v in c])
    D = X.astype(float) / float(L) - cf
    D -= np.round(D)
    shifts = unit_translates(d) if translates else [np.zeros(d)]
    if M is None:
        Mf = np.eye(d)
        scale = 1.0
    else:
        Mf = np.array([[float(v) for v in row] for row in M])
        scale = float(np.abs(Mf).max()) * d
    best = None
    for k in shifts:
        val = np.sqrt((((D + k) @ Mf.T) ** 2).sum(axis=1))
        best = val if best is None else np.minimum(best, val)
    rf = float(r)
    eps = 1e-9 * (1.0 + scale) * 1e-3 + 1e-12 * rf
    mask = best <= rf if closed else best < rf
    amb = np.nonzero(np.abs(best - rf) <= eps)[0]
    if amb.size:
        Mx = [list(map(frac, row)) for row in M] if M is not None else None
        r2 = r * r
        kint = list(product((-1, 0, 1), repeat=d)) if translates else [(0,) * d]
        for i in amb:
            v = torus_diff([Fraction(int(X[i, j]), int(L)) for j in range(d)], c)
            vals = []
            for k in kint:
                w = [vj + kj for vj, kj in zip(v, k)]
                if Mx is not None:
                    w = [sum(m * x for m, x in zip(row, w)) for row in Mx]
                vals.append(norm_sq(w))
            q = min(vals)
            mask[i] = q <= r2 if closed else q < r2
    return mask
