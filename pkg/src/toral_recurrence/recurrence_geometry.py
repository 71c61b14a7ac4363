"""The recurrence set ``R_n(psi) = {x : (A^n - I) x mod 1 in B(0, psi(n))}``.

It is a union of ``H_n`` translated copies of the ellipsoid ``(A^n - I)^{-1} B(0, psi(n))``,
one per period-n point. Everything that can be decided exactly (membership,
orbit hits, interval box counts) is decided with integers and Fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import mpmath
import numpy as np
from mpmath import mp

from .certify import frac, norm_sq, torus_diff, within_mask
from .errors import HypothesisViolated, PrecisionFailure, ScaleTooFine
from .exact_linalg import IntegerMatrix, eigen_moduli, matrix_power, shifted_power
from .periodic_lattice import DEFAULT_CAP, PeriodicSet, enumerate_periodic
from .spectrum_dim import RateFunction, Spectrum

MAX_BOXES = 10 ** 8


def psi_value(psi, n: int):
    """``psi(n)`` from a RateFunction, or a bare number used as-is."""
    if isinstance(psi, RateFunction):
        return psi.psi(n)
    return psi


def _torus_point(x):
    return tuple(frac(v) for v in x)


# ---------------------------------------------------------------- membership

def _int_point(x):
    """Integer numerators ``v`` and denominator ``q`` with ``x = v / q`` exactly."""
    x = _torus_point(x)
    q = math.lcm(*(v.denominator for v in x))
    return [int(v * q) for v in x], q


def _centered_sq(w, q) -> int:
    """``q^2 |w / q mod 1|^2`` with each coordinate reduced to ``[-q/2, q/2]``."""
    out = 0
    for t in w:
        t %= q
        if 2 * t > q:
            t -= q
        out += t * t
    return out


def _below(sq: int, q: int, r: Fraction) -> bool:
    """``sq / q^2 < r^2`` in integers."""
    return sq * r.denominator ** 2 < r.numerator ** 2 * q * q


def membership(x, A: IntegerMatrix, n: int, psi) -> bool:
    """Algebraic test ``|(A^n - I) x mod 1| < psi(n)``, exact on the value of ``x``."""
    r = frac(psi_value(psi, n))
    if r >= Fraction(1, 2):
        raise HypothesisViolated("membership needs psi(n) < 1/2")
    v, q = _int_point(x)
    w = [sum(a * b for a, b in zip(row, v)) for row in shifted_power(A, n).rows]
    return _below(_centered_sq(w, q), q, r)


def dynamical_membership(x, A: IntegerMatrix, n: int, psi, exact: bool = True) -> bool:
    """``T^n x in B(x, psi(n))``; with ``exact=False`` the orbit is iterated in float64."""
    r = psi_value(psi, n)
    if exact:
        v, q = _int_point(x)
        y = [sum(a * b for a, b in zip(row, v)) % q for row in matrix_power(A, n).rows]
        return _below(_centered_sq([a - b for a, b in zip(y, v)], q), q, frac(r))
    x0 = np.asarray([float(v) for v in x])
    Af = A.to_numpy().astype(float)
    y = x0.copy()
    for _ in range(n):
        y = np.mod(Af @ y, 1.0)
    diff = y - x0
    diff -= np.round(diff)
    return float(np.sqrt(diff @ diff)) < float(r)


def boundary_gap(x, A: IntegerMatrix, n: int, psi) -> float:
    """Distance of ``|(A^n - I) x mod 1|`` from ``psi(n)``, in float."""
    M = shifted_power(A, n).to_numpy().astype(float)
    y = M @ np.asarray([float(v) for v in x], dtype=float)
    y -= np.round(y)
    return abs(float(np.linalg.norm(y)) - float(psi_value(psi, n)))


# ------------------------------------------------------------ ellipsoids

def _fmt(q):
    if isinstance(q, Fraction):
        return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)
    return q


def singular_values(M: IntegerMatrix) -> tuple:
    """Singular values of an integer matrix, ascending.

    Computed with mpmath at increasing precision until two successive runs agree
    to 1e-15 relative, which keeps the small ones accurate for ill-conditioned ``M``.
    """
    digits = max(len(str(abs(v))) for row in M.rows for v in row)
    dps = 30 + 2 * digits
    prev = None
    for _ in range(8):
        with mp.workdps(dps):
            sv = mpmath.svd_r(mpmath.matrix(M.to_list()), compute_uv=False)
            cur = sorted(float(v) for v in sv)
        if prev is not None and all(abs(a - b) <= 1e-15 * abs(b) for a, b in zip(cur, prev)):
            return tuple(cur)
        prev = cur
        dps *= 2
    raise PrecisionFailure("singular values did not stabilise")


def _semi_axes_exact(M: IntegerMatrix, psi) -> tuple:
    """``psi * sigma_j(M^{-1})``, descending."""
    p = float(psi)
    return tuple(p / s for s in singular_values(M))


def _semi_axes_model(A: IntegerMatrix, n: int, psi) -> tuple:
    growth = sorted(float(g) for g in eigen_moduli(A).growth(n))
    return tuple(float(psi) / g for g in growth)


@dataclass(frozen=True)
class Ellipsoid:
    """``center + (A^n - I)^{-1} B(0, psi)`` on the torus."""

    center: tuple
    degree: int
    psi: object
    shape: IntegerMatrix
    semi_axes_exact: tuple = ()
    semi_axes_model: tuple = ()

    def contains(self, x) -> bool:
        v = torus_diff(_torus_point(x), self.center)
        r2 = frac(self.psi) ** 2
        for k in product((-1, 0, 1), repeat=len(v)):
            w = self.shape.apply([a + b for a, b in zip(v, k)])
            if norm_sq(w) < r2:
                return True
        return False

    def volume(self) -> float:
        d = len(self.center)
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * math.prod(self.semi_axes_exact)

    def to_json(self) -> dict:
        return {
            "center": [_fmt(c) for c in self.center],
            "degree": self.degree,
            "psi": _fmt(self.psi),
            "semi_axes_exact": list(self.semi_axes_exact),
            "semi_axes_model": list(self.semi_axes_model),
        }


def ellipsoid(A: IntegerMatrix, n: int, psi, center) -> Ellipsoid:
    r = psi_value(psi, n)
    M = shifted_power(A, n)
    return Ellipsoid(_torus_point(center), n, r, M, _semi_axes_exact(M, r), _semi_axes_model(A, n, r))


@dataclass(frozen=True, eq=False)
class EllipsoidFamily:
    """All ``H_n`` ellipsoids of ``R_n(psi)``; members are built on demand."""

    matrix: IntegerMatrix
    degree: int
    psi: object  # the radius psi(n)
    points: PeriodicSet
    semi_axes_exact: tuple = ()
    semi_axes_model: tuple = ()
    rate: RateFunction | None = field(default=None)

    @property
    def shape(self) -> IntegerMatrix:
        return shifted_power(self.matrix, self.degree)

    def __len__(self):
        return self.points.cardinality

    def members(self):
        for c in self.points.points():
            yield Ellipsoid(c, self.degree, self.psi, self.shape, self.semi_axes_exact, self.semi_axes_model)

    def contains(self, x) -> bool:
        """Union membership, by the same quadratic form test applied to every center."""
        hits = within_mask(self.points.numerators, self.points.denominator, _torus_point(x),
                           self.psi, M=self.shape.rows, translates=True)
        return bool(hits.any())

    def total_volume(self) -> float:
        d = self.matrix.dim
        return len(self) * math.pi ** (d / 2) / math.gamma(d / 2 + 1) * math.prod(self.semi_axes_exact)


def decompose_Rn(A: IntegerMatrix, n: int, psi, cap: int = DEFAULT_CAP) -> EllipsoidFamily:
    r = psi_value(psi, n)
    if r >= Fraction(1, 2):
        raise HypothesisViolated(f"psi({n}) = {float(r)} must be < 1/2")
    pset = enumerate_periodic(A, n, cap)
    M = shifted_power(A, n)
    return EllipsoidFamily(A, n, r, pset, _semi_axes_exact(M, r), _semi_axes_model(A, n, r),
                           psi if isinstance(psi, RateFunction) else None)


# ------------------------------------------------------------ semi-axes

@dataclass(frozen=True)
class SemiAxesReport:
    degree: int
    exact: tuple
    model: tuple
    ratios: tuple

    def to_json(self):
        return {"n": self.degree, "exact": list(self.exact), "model": list(self.model),
                "ratios": list(self.ratios)}


def semi_axes(A: IntegerMatrix, n: int, psi) -> SemiAxesReport:
    r = psi_value(psi, n)
    ex = _semi_axes_exact(shifted_power(A, n), r)
    mo = _semi_axes_model(A, n, r)
    return SemiAxesReport(n, ex, mo, tuple(e / m for e, m in zip(ex, mo)))


@dataclass(frozen=True)
class SemiAxesSweep:
    reports: tuple
    max_log_ratio: tuple  # per n, max_j |log(exact/model)|
    exponent: float  # fitted slope of log(max ratio) against log n

    def to_json(self):
        return {"reports": [r.to_json() for r in self.reports],
                "max_log_ratio": list(self.max_log_ratio), "exponent": self.exponent}


def semi_axes_sweep(A: IntegerMatrix, psi, n_values) -> SemiAxesSweep:
    """Ratios over a range of n and the polynomial growth exponent of the worst one."""
    reps = tuple(semi_axes(A, n, psi) for n in n_values)
    worst = tuple(max(abs(math.log(t)) for t in r.ratios) for r in reps)
    ns = np.log(np.array([r.degree for r in reps], dtype=float))
    if len(reps) >= 2:
        slope = float(np.polyfit(ns, np.array(worst), 1)[0])
    else:
        slope = 0.0
    return SemiAxesSweep(reps, worst, slope)


# ------------------------------------------------------------ separation

@dataclass(frozen=True)
class MinDistance:
    distance: float  # certified lower bound on the smallest gap, inf when H_n = 1
    model_bound: float  # 2 (1/3 - psi) / max_j |lambda_j^n - 1|
    rigorous_bound: float  # (1 - 2 psi) / sigma_max(A^n - I)
    holds: bool

    def to_json(self):
        return {"distance": self.distance, "model_bound": self.model_bound,
                "rigorous_bound": self.rigorous_bound, "holds": self.holds}


def ellipsoid_min_distance(family: EllipsoidFamily) -> MinDistance:
    """Lower bound on the gap between distinct ellipsoids of a family.

    The members are translates of one symmetric convex body ``K``, so the gap
    between the ones at ``c`` and ``c'`` is ``dist(y, 2K)`` minimized over lifts
    of ``y = c' - c``. Differences of periodic points are periodic points, so
    scanning the nonzero points once covers every pair. ``dist(y, 2K)`` is bounded
    below by the support-function estimate ``|y| - h_{2K}(y/|y|)`` and by
    ``(|My| - 2 psi) / sigma_max(M)``.
    """
    A, n = family.matrix, family.degree
    psi = float(family.psi)
    M = family.shape.to_numpy().astype(float)
    growth = max(float(g) for g in eigen_moduli(A).growth(n))
    smax = float(np.linalg.norm(M, 2))
    model = 2 * (1 / 3 - psi) / growth
    rig = (1 - 2 * psi) / smax
    if len(family) == 1:
        return MinDistance(math.inf, model, rig, True)
    Minv_T = np.linalg.inv(M).T
    best = math.inf
    d = A.dim
    for X, L in family.points.chunks():
        Y = X.astype(float) / float(L)
        Y -= np.round(Y)
        nz = np.any(X != 0, axis=1)
        Y = Y[nz]
        for k in product((-1, 0, 1), repeat=d):
            Z = Y + np.array(k, dtype=float)
            norm = np.linalg.norm(Z, axis=1)
            support = 2 * psi * np.linalg.norm(Z @ Minv_T.T, axis=1) / norm
            via_m = (np.linalg.norm(Z @ M.T, axis=1) - 2 * psi) / smax
            lb = np.maximum(norm - support, via_m)
            best = min(best, float(lb.min()))
    best *= 1 - 1e-12  # absorb rounding so the figure stays a lower bound
    return MinDistance(best, model, rig, best >= model)


# ------------------------------------------------------------ covering

def _as_spectrum(A_or_spec) -> Spectrum:
    return A_or_spec if isinstance(A_or_spec, Spectrum) else eigen_moduli(A_or_spec)


@dataclass(frozen=True)
class CoverCount:
    k: int
    degree: int
    count: float  # balls of radius l_{n,k} per ellipsoid
    log_count: float
    log_H: float
    log_radius: float  # log l_{n,k}

    def log_cost(self, s: float) -> float:
        """``log(H_n * count * l_{n,k}^s)``."""
        return self.log_H + self.log_count + s * self.log_radius

    def to_json(self, s: float | None = None):
        out = {"k": self.k, "n": self.degree, "count": self.count, "log_count": self.log_count,
               "log_radius": self.log_radius}
        if s is not None:
            out["log_cost"] = self.log_cost(s)
        return out


def _log_psi(psi, n):
    if isinstance(psi, RateFunction):
        return psi.log_psi(n)
    v = frac(psi)
    return math.log(v.numerator) - math.log(v.denominator)


def covering_count(A_or_spec, n: int, psi, k: int) -> CoverCount:
    """``prod_{j<=k} |lambda_k^n - 1| / |lambda_j^n - 1|`` balls of radius ``l_{n,k}`` per ellipsoid."""
    spec = _as_spectrum(A_or_spec)
    if not 1 <= k <= spec.d:
        raise ValueError(f"k must lie in 1..{spec.d}")
    lg = sorted(spec.log_growth(n))
    log_count = sum(lg[k - 1] - lg[j] for j in range(k))
    log_radius = math.log(2) + _log_psi(psi, n) - lg[k - 1]
    count = math.exp(log_count) if log_count < 700 else math.inf  # the log stays exact
    return CoverCount(k, n, count, log_count, sum(lg), log_radius)


@dataclass(frozen=True)
class UpperBoundSum:
    s: float
    log_terms: tuple
    argmin_k: tuple
    log_partial_sum: float
    tail_ratio: float
    verdict: str  # converging / diverging / inconclusive

    def to_json(self):
        return {"s": self.s, "log_terms": list(self.log_terms), "argmin_k": list(self.argmin_k),
                "log_partial_sum": self.log_partial_sum, "tail_ratio": self.tail_ratio,
                "verdict": self.verdict}


def upper_bound_sum(A_or_spec, psi, s: float, n_range, margin: float = 0.01) -> UpperBoundSum:
    """Partial sum over n of the cheapest covering cost, with a tail-ratio verdict.

    The verdict uses the geometric mean of successive term ratios over the
    second half of the range.
    """
    spec = _as_spectrum(A_or_spec)
    if not 0 < s <= spec.d:
        raise ValueError("s must lie in (0, d]")
    ns = list(n_range)
    logs, ks = [], []
    for n in ns:
        costs = [covering_count(spec, n, psi, k).log_cost(s) for k in range(1, spec.d + 1)]
        k = int(np.argmin(costs))
        logs.append(costs[k])
        ks.append(k + 1)
    top = max(logs)
    log_sum = top + math.log(math.fsum(math.exp(v - top) for v in logs))
    half = len(ns) // 2
    if len(ns) >= 2:
        a = min(half, len(ns) - 2)
        ratio = math.exp((logs[-1] - logs[a]) / (ns[-1] - ns[a]))
    else:
        ratio = math.nan
    if ratio < 1 - margin:
        verdict = "converging"
    elif ratio > 1 + margin:
        verdict = "diverging"
    else:
        verdict = "inconclusive"
    return UpperBoundSum(s, tuple(logs), tuple(ks), log_sum, ratio, verdict)


# ------------------------------------------------------------ orbits

def _integer_orbit_start(x):
    x = _torus_point(x)
    q = math.lcm(*(v.denominator for v in x))
    return [int(v * q) % q for v in x], q


def recurrence_indices(x, A: IntegerMatrix, psi, N: int) -> list:
    """All ``n <= N`` with ``T^n x in B(x, psi(n))``, exact on the value of ``x``.

    Floats are taken at their exact binary value, so the orbit is still exact.
    """
    v0, q = _integer_orbit_start(x)
    rows = A.rows
    v = list(v0)
    hits = []
    for n in range(1, N + 1):
        v = [sum(a * b for a, b in zip(row, v)) % q for row in rows]
        diff = [(a - b) % q for a, b in zip(v, v0)]
        diff = [t - q if 2 * t > q else t for t in diff]
        r = frac(psi_value(psi, n))
        if Fraction(sum(t * t for t in diff), q * q) < r * r:
            hits.append(n)
    return hits


@dataclass(frozen=True)
class OrbitRecord:
    start: tuple
    horizon: int
    distances: np.ndarray  # rho(T^n x, x) for n = 1..N


def orbit_record(x, A: IntegerMatrix, N: int) -> OrbitRecord:
    v0, q = _integer_orbit_start(x)
    v = list(v0)
    out = np.empty(N)
    for n in range(N):
        v = [sum(a * b for a, b in zip(row, v)) % q for row in A.rows]
        diff = [(a - b) % q for a, b in zip(v, v0)]
        diff = [min(t, q - t) for t in diff]
        out[n] = math.sqrt(sum(Fraction(t * t, q * q) for t in diff))
    return OrbitRecord(_torus_point(x), N, out)


@dataclass(frozen=True)
class BoshernitzanResult:
    value: float
    argmin: int

    def to_json(self):
        return {"value": self.value, "argmin": self.argmin}


def boshernitzan_statistic(x, A: IntegerMatrix, tau: float, N: int) -> BoshernitzanResult:
    """``min_{n <= N} n^{1/tau} rho(T^n x, x)`` and where it is attained."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    rec = orbit_record(x, A, N)
    w = np.arange(1, N + 1, dtype=float) ** (1.0 / tau) * rec.distances
    i = int(np.argmin(w))
    return BoshernitzanResult(float(w[i]), i + 1)


MERSENNE_61 = 2 ** 61 - 1
MERSENNE_31 = 2 ** 31 - 1


def boshernitzan_batch(A: IntegerMatrix, tau: float, N: int, samples: int, rng) -> np.ndarray:
    """The statistic for ``samples`` random starts ``k/q`` with prime ``q``.

    Orbits of rational points are computed exactly as integer vectors mod ``q``.
    """
    rowsum = max(sum(abs(a) for a in row) for row in A.rows)
    q = MERSENNE_61 if rowsum * MERSENNE_61 < 2 ** 63 else MERSENNE_31
    if rowsum * q >= 2 ** 63:
        raise ValueError("matrix entries too large for int64 orbits")
    d = A.dim
    Ai = np.array(A.rows, dtype=np.int64)
    v0 = rng.integers(0, q, size=(samples, d), dtype=np.int64)
    v = v0.copy()
    best = np.full(samples, np.inf)
    for n in range(1, N + 1):
        acc = np.zeros_like(v)
        for j in range(d):
            acc = (acc + (v[:, j:j + 1] * Ai[:, j][None, :]) % q) % q
        v = acc
        diff = (v - v0) % q
        diff = np.minimum(diff, q - diff).astype(float) / q
        w = n ** (1.0 / tau) * np.sqrt((diff ** 2).sum(axis=1))
        best = np.minimum(best, w)
    return best


# ------------------------------------------------------------ box counting

@dataclass(frozen=True)
class BoxCount:
    scales: tuple  # s, side 2^-s
    counts: tuple
    slope: float

    def to_json(self):
        return {"slope": self.slope, "per_scale": [
            {"scale": s, "side": 2.0 ** -s, "count": str(c)} for s, c in zip(self.scales, self.counts)]}


def torus_region(d: int):
    return ("torus", d)


def _fit_slope(scales, counts):
    if len(scales) < 2:
        return math.nan
    x = np.array(scales, dtype=float) * math.log(2)
    y = np.log(np.array(counts, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _boxes_1d(families, s):
    size = 1 << s
    marks = np.zeros(size + 1, dtype=np.int64)
    for fam in families:
        m = abs(fam.shape.rows[0][0])
        rho = frac(fam.psi) / m
        L = fam.points.denominator
        for p in fam.points.numerators[:, 0].tolist():
            lo = (Fraction(int(p), L) - rho) * size
            hi = (Fraction(int(p), L) + rho) * size
            i0 = math.floor(lo)
            i1 = math.ceil(hi) - 1
            if i1 - i0 + 1 >= size:
                return size
            a, b = i0 % size, i1 % size
            if a <= b:
                marks[a] += 1
                marks[b + 1] -= 1
            else:
                marks[a] += 1
                marks[size] -= 1
                marks[0] += 1
                marks[b + 1] -= 1
    return int((np.cumsum(marks[:size]) > 0).sum())


def _min_quadratic_on_rect(Q, c, lo, hi):
    """Min of ``(x-c)^T Q (x-c)`` over boxes ``[lo, hi]`` (rows), for 2x2 positive definite Q."""
    inside = np.all((c >= lo) & (c <= hi), axis=1)
    best = np.full(len(lo), np.inf)
    for axis in (0, 1):
        other = 1 - axis
        for edge in (lo, hi):
            fixed = edge[:, axis] - c[axis]
            # minimize over t in [lo_other, hi_other] with coordinate ``axis`` fixed
            t_star = c[other] - Q[axis, other] / Q[other, other] * fixed
            t = np.clip(t_star, lo[:, other], hi[:, other]) - c[other]
            val = Q[axis, axis] * fixed ** 2 + 2 * Q[axis, other] * fixed * t + Q[other, other] * t ** 2
            best = np.minimum(best, val)
    best[inside] = 0.0
    return best


def _boxes_2d(families, s):
    size = 1 << s
    h = 1.0 / size
    found = []
    for fam in families:
        M = fam.shape.to_numpy().astype(float)
        Q = M.T @ M
        psi = float(fam.psi)
        ext = psi * np.linalg.norm(np.linalg.inv(M), axis=1)
        for c in fam.points.as_float():
            i0 = np.floor((c - ext) / h).astype(int)
            i1 = np.floor((c + ext) / h).astype(int)
            gi, gj = np.meshgrid(np.arange(i0[0], i1[0] + 1), np.arange(i0[1], i1[1] + 1), indexing="ij")
            gi, gj = gi.ravel(), gj.ravel()
            lo = np.stack([gi * h, gj * h], axis=1)
            vals = _min_quadratic_on_rect(Q, c, lo, lo + h)
            ok = vals < psi * psi
            found.append((gi[ok] % size) * size + (gj[ok] % size))
    if not found:
        return 0
    return int(np.unique(np.concatenate(found)).size)


def box_count_dimension(region, scales) -> BoxCount:
    """Count half-open dyadic boxes of side ``2^-s`` meeting the region, and fit a slope.

    ``region`` is a list of EllipsoidFamily objects of one dimension, or
    ``torus_region(d)`` for the whole torus.
    """
    scales = tuple(int(s) for s in scales)
    if isinstance(region, tuple) and region and region[0] == "torus":
        d = region[1]
        families = None
    else:
        families = list(region)
        d = families[0].matrix.dim
    if d > 2:
        raise ValueError("box counting supports d <= 2")
    counts = []
    for s in scales:
        if 2.0 ** (s * d) > MAX_BOXES:
            raise ScaleTooFine(int(2 ** (s * d)), MAX_BOXES)
        if families is None:
            counts.append(2 ** (s * d))
        elif d == 1:
            counts.append(_boxes_1d(families, s))
        else:
            counts.append(_boxes_2d(families, s))
    return BoxCount(scales, tuple(counts), _fit_slope(scales, counts))
