"""Closed-form Hausdorff dimension of the recurrence set.

Two formulas are evaluated over an ascending list of eigenvalue moduli
``m_1 <= ... <= m_d`` (all > 1) and a decay rate ``alpha``:

* the general one, ``min_j (j log m_j + sum_{i>j} log m_i) / (alpha + log m_j)``,
  exact for ``alpha >= log(m_d/m_1)`` and an upper bound otherwise;
* the one for matrices diagonalizable over Q with integer eigenvalues, which adds
  the (negative) correction ``sum_{k in K(j)} (alpha + log m_j - log m_k)`` with
  ``K(j) = {i : log m_i > log m_j + alpha}``.

Comparisons that decide ``K(j)`` or the exactness label are certified: exact
when the moduli are rational and ``alpha`` is the log of a rational, interval
arithmetic otherwise.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction

import mpmath
from mpmath import iv, mp

from .errors import AmbiguousComparison, InvalidSpectrum

_EVAL_PREC = 200


@dataclass(frozen=True)
class LogRate:
    """The rate ``alpha = log(base)`` held exactly, e.g. ``LogRate(2)`` for ln 2."""

    base: Fraction

    def __post_init__(self):
        base = Fraction(self.base)
        if base < 1:
            raise ValueError("alpha must be nonnegative (base >= 1)")
        object.__setattr__(self, "base", base)

    def __float__(self):
        return math.log(self.base.numerator) - math.log(self.base.denominator)

    def scaled(self, t: int) -> "LogRate":
        return LogRate(self.base ** t)

    def __str__(self):
        return f"ln({self.base})"


def alpha_base(alpha):
    """``q`` with ``alpha = log q`` exactly, if such a rational is known."""
    if isinstance(alpha, LogRate):
        return alpha.base
    if alpha == 0:
        return Fraction(1)
    return None


def is_infinite(alpha) -> bool:
    return not isinstance(alpha, LogRate) and math.isinf(alpha)


def _check_alpha(alpha):
    if not isinstance(alpha, LogRate) and not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")


def alpha_mp(alpha):
    if isinstance(alpha, LogRate):
        return mp.log(alpha.base.numerator) - mp.log(alpha.base.denominator)
    if isinstance(alpha, Fraction):
        return mpmath.mpf(alpha.numerator) / alpha.denominator
    return mpmath.mpf(alpha)


@contextmanager
def _ivprec(prec):
    old = iv.prec
    iv.prec = prec
    try:
        yield
    finally:
        iv.prec = old


@dataclass(frozen=True)
class RateFunction:
    """Target radii ``psi(n)``: exponential ``e^{-alpha n}`` or an explicit table.

    For ``LogRate`` alphas ``psi(n) = base**-n`` is an exact ``Fraction``.
    """

    alpha: object = None
    table: tuple | None = None

    def __post_init__(self):
        if self.table is None:
            if self.alpha is None:
                raise ValueError("need alpha or table")
            _check_alpha(self.alpha)
        else:
            vals = tuple(self.table)
            if not vals:
                raise ValueError("empty psi table")
            if any(v <= 0 for v in vals):
                raise ValueError("psi values must be positive")
            if any(b >= a for a, b in zip(vals, vals[1:])):
                raise ValueError("psi table must be strictly decreasing")
            object.__setattr__(self, "table", vals)

    @classmethod
    def exponential(cls, alpha) -> "RateFunction":
        return cls(alpha=alpha)

    @classmethod
    def from_table(cls, values) -> "RateFunction":
        return cls(table=tuple(values))

    @property
    def kind(self) -> str:
        return "table" if self.table is not None else "exponential"

    @property
    def horizon(self):
        return len(self.table) if self.table is not None else None

    def psi(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.table is not None:
            if n > len(self.table):
                raise ValueError(f"psi table has no entry for n={n}")
            return self.table[n - 1]
        if is_infinite(self.alpha):
            raise ValueError("psi is identically 0 for alpha = inf")
        if isinstance(self.alpha, LogRate):
            return 1 / self.alpha.base ** n
        if self.alpha == 0:
            return Fraction(1)
        val = math.exp(-float(self.alpha) * n)
        if val == 0.0:
            raise ValueError(f"psi({n}) underflows")
        return val

    def log_psi(self, n: int) -> float:
        if self.table is None and not isinstance(self.alpha, LogRate):
            return -float(self.alpha) * n
        v = self.psi(n)
        if isinstance(v, Fraction):
            return math.log(v.numerator) - math.log(v.denominator)
        return math.log(v)

    @property
    def lower_order(self):
        """``alpha``; for a table, ``min -log psi(n)/n`` over the upper half of the horizon."""
        if self.table is None:
            return self.alpha
        N = len(self.table)
        return min(-self.log_psi(n) / n for n in range(max(1, N // 2), N + 1))


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalue moduli with certified error radii.

    ``exact`` holds the signed eigenvalues when they are known exactly
    (integer spectra); ``eigenvalues`` holds complex approximations.
    """

    moduli: tuple
    radii: tuple
    eigenvalues: tuple | None = None
    exact: tuple | None = None
    tol: float = 0.0

    def __post_init__(self):
        if not self.moduli:
            raise ValueError("empty spectrum")
        if any(b < a for a, b in zip(self.moduli, self.moduli[1:])):
            raise ValueError("moduli must be ascending")

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        """Build from eigenvalues (ints/Fractions are exact; floats are taken at face value)."""
        vals = sorted(values, key=lambda v: (abs(v), v))
        exact = all(isinstance(v, (int, Fraction)) for v in vals)
        with mp.workprec(_EVAL_PREC):
            mods = tuple(
                mpmath.mpf(abs(v).numerator) / abs(v).denominator
                if isinstance(v, Fraction)
                else mpmath.mpf(abs(v))
                for v in vals
            )
        return cls(
            moduli=mods,
            radii=tuple(mpmath.mpf(0) for _ in vals),
            eigenvalues=tuple(mpmath.mpc(float(v)) if not isinstance(v, Fraction) else
                              mpmath.mpc(mpmath.mpf(v.numerator) / v.denominator) for v in vals),
            exact=tuple(Fraction(v) for v in vals) if exact else None,
        )

    @property
    def d(self) -> int:
        return len(self.moduli)

    @property
    def log_moduli(self) -> tuple:
        with mp.workprec(_EVAL_PREC):
            return tuple(float(mp.log(m)) for m in self.moduli)

    def as_floats(self) -> list:
        return [float(m) for m in self.moduli]

    @property
    def hypothesis_ok(self) -> bool:
        """All moduli exceed 1 by more than the certification tolerance."""
        if self.exact is not None:
            return all(abs(x) > 1 for x in self.exact)
        return all(m - r > 1 + self.tol for m, r in zip(self.moduli, self.radii))

    def growth(self, n: int) -> list:
        """``|lambda_j^n - 1|`` aligned with the moduli (exact ints when possible)."""
        if self.exact is not None:
            return [abs(x ** n - 1) for x in self.exact]
        with mp.workprec(_EVAL_PREC + 4 * n):
            if self.eigenvalues is not None:
                return [float(abs(mpmath.power(z, n) - 1)) for z in self.eigenvalues]
            return [float(mpmath.power(m, n) - 1) for m in self.moduli]

    def log_growth(self, n: int) -> list:
        with mp.workprec(_EVAL_PREC + 4 * n):
            if self.exact is not None:
                return [float(mp.log(abs(x ** n - 1))) if x ** n != 1 else -math.inf for x in self.exact]
            if self.eigenvalues is not None:
                return [float(mp.log(abs(mpmath.power(z, n) - 1))) for z in self.eigenvalues]
            return [float(mp.log(mpmath.power(m, n) - 1)) for m in self.moduli]

    def powered(self, t: int) -> "Spectrum":
        """Spectrum of ``A**t``."""
        if self.exact is not None:
            return Spectrum.from_values([x ** t for x in self.exact])
        with mp.workprec(_EVAL_PREC):
            mods = tuple(m ** t for m in self.moduli)
            rads = tuple((m + r) ** t - m ** t for m, r in zip(self.moduli, self.radii))
            eig = tuple(z ** t for z in self.eigenvalues) if self.eigenvalues else None
        return Spectrum(mods, rads, eig, None, self.tol)


def _interval(spec, i):
    return iv.mpf(spec.moduli[i]) + iv.mpf([-spec.radii[i], spec.radii[i]])


def log_ratio_sign(spec: Spectrum, i: int, j: int, alpha):
    """Certified sign of ``log m_i - log m_j - alpha`` (0-based indices); None if undecidable."""
    base = alpha_base(alpha)
    if spec.exact is not None and base is not None:
        lhs = abs(spec.exact[i])
        rhs = abs(spec.exact[j]) * base
        return (lhs > rhs) - (lhs < rhs)
    for prec in (64, 128, 256, 512, 1024, 2048):
        with _ivprec(prec):
            if isinstance(alpha, LogRate):
                a = iv.log(iv.mpf(alpha.base.numerator) / iv.mpf(alpha.base.denominator))
            elif isinstance(alpha, Fraction):
                a = iv.mpf(alpha.numerator) / iv.mpf(alpha.denominator)
            else:
                a = iv.mpf(alpha)
            diff = iv.log(_interval(spec, i)) - iv.log(_interval(spec, j)) - a
            if diff.a > 0:
                return 1
            if diff.b < 0:
                return -1
            if diff.a == 0 and diff.b == 0:
                return 0
        if any(spec.radii[k] > 0 for k in (i, j)) and prec >= 256:
            break
    return None


def _check_valid(spec):
    if spec.exact is not None:
        bad = any(abs(x) <= 1 for x in spec.exact)
    else:
        bad = any(m - r <= 1 for m, r in zip(spec.moduli, spec.radii))
    if bad:
        raise InvalidSpectrum(f"all eigenvalue moduli must exceed 1, got {spec.as_floats()}")


def alpha_threshold(spec: Spectrum) -> float:
    """``log(m_d / m_1)``, beyond which the general formula is exact."""
    with mp.workprec(_EVAL_PREC):
        return float(mp.log(spec.moduli[-1]) - mp.log(spec.moduli[0]))


def above_threshold(spec: Spectrum, alpha):
    """True/False if ``alpha >= log(m_d/m_1)`` is certified either way, else None."""
    if is_infinite(alpha):
        return True
    s = log_ratio_sign(spec, spec.d - 1, 0, alpha)
    return None if s is None else s <= 0


@dataclass(frozen=True)
class DimensionResult:
    value: float
    argmin_j: int
    per_j_values: tuple
    label: str
    alpha_threshold: float
    k_sets: tuple | None = None

    def __post_init__(self):
        d = len(self.per_j_values)
        if not (0 <= self.value <= d + 1e-12):
            raise AssertionError(f"dimension {self.value} outside [0, {d}]")

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "label": self.label,
            "argmin_j": self.argmin_j,
            "per_j": list(self.per_j_values),
            "k_sets": None if self.k_sets is None else [sorted(k) for k in self.k_sets],
            "alpha_threshold": self.alpha_threshold,
        }


def _pick_min(vals):
    lo = min(vals)
    tie = mpmath.mpf(2) ** -120 * max(1, abs(lo))
    j = next(k for k, v in enumerate(vals) if v - lo <= tie)
    return j + 1, float(lo)


def dim_general(spec: Spectrum, alpha) -> DimensionResult:
    """General dimension formula, minimized over j; ties go to the smaller j."""
    _check_valid(spec)
    _check_alpha(alpha)
    d = spec.d
    thr = alpha_threshold(spec)
    if is_infinite(alpha):
        return DimensionResult(0.0, 1, (0.0,) * d, "exact", thr)
    with mp.workprec(_EVAL_PREC):
        L = [mp.log(m) for m in spec.moduli]
        a = alpha_mp(alpha)
        vals = [(j * L[j - 1] + mpmath.fsum(L[j:])) / (a + L[j - 1]) for j in range(1, d + 1)]
        argmin, value = _pick_min(vals)
    label = "exact" if above_threshold(spec, alpha) else "upper_bound"
    return DimensionResult(value, argmin, tuple(float(v) for v in vals), label, thr)


def k_set(spec: Spectrum, alpha, j: int) -> frozenset:
    """Indices ``i`` (1-based) with ``log m_i > log m_j + alpha``, certified."""
    if not 1 <= j <= spec.d:
        raise ValueError(f"j must be in 1..{spec.d}")
    if is_infinite(alpha):
        return frozenset()
    out = set()
    for i in range(spec.d):
        s = log_ratio_sign(spec, i, j - 1, alpha)
        if s is None:
            raise AmbiguousComparison(
                f"cannot decide log m_{i + 1} > log m_{j} + alpha at available precision"
            )
        if s > 0:
            out.add(i + 1)
    return frozenset(out)


def dim_rational_diagonal(spec: Spectrum, alpha, hypotheses_verified: bool = False) -> DimensionResult:
    """Dimension formula for matrices diagonalizable over Q with integer eigenvalues.

    Labelled exact when the caller vouches for those hypotheses or when alpha is
    past the threshold (where it coincides with :func:`dim_general`).
    """
    _check_valid(spec)
    _check_alpha(alpha)
    d = spec.d
    thr = alpha_threshold(spec)
    if is_infinite(alpha):
        return DimensionResult(0.0, 1, (0.0,) * d, "exact", thr, tuple(frozenset() for _ in range(d)))
    ks = tuple(k_set(spec, alpha, j) for j in range(1, d + 1))
    with mp.workprec(_EVAL_PREC):
        L = [mp.log(m) for m in spec.moduli]
        a = alpha_mp(alpha)
        vals = []
        for j in range(1, d + 1):
            corr = [a + L[j - 1] - L[k - 1] for k in ks[j - 1]]
            assert all(c < 0 for c in corr), "correction terms must be negative"
            num = j * L[j - 1] + mpmath.fsum(corr) + mpmath.fsum(L[j:])
            vals.append(num / (L[j - 1] + a))
        argmin, value = _pick_min(vals)
    exact = hypotheses_verified or bool(above_threshold(spec, alpha))
    return DimensionResult(value, argmin, tuple(float(v) for v in vals),
                           "exact" if exact else "upper_bound", thr, ks)


def dim_equal_moduli(d: int, lam, alpha) -> float:
    """``d log(lam) / (alpha + log(lam))`` for a spectrum of equal moduli."""
    if not lam > 1:
        raise InvalidSpectrum("lambda must exceed 1")
    _check_alpha(alpha)
    if is_infinite(alpha):
        return 0.0
    with mp.workprec(_EVAL_PREC):
        if isinstance(lam, Fraction):
            ll = mp.log(lam.numerator) - mp.log(lam.denominator)
        else:
            ll = mp.log(lam)
        return float(d * ll / (alpha_mp(alpha) + ll))
