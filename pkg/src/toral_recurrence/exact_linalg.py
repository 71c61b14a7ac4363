"""Exact integer/rational matrix arithmetic.

Everything here works on Python ints and ``fractions.Fraction`` so nothing
overflows and nothing is rounded, except :func:`eigen_moduli`, which returns
root moduli with certified error radii.
"""
from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce

import mpmath
from mpmath import mp

from .errors import PrecisionFailure, SingularMatrix


def _square(rows, conv):
    rows = tuple(tuple(conv(v) for v in r) for r in rows)
    d = len(rows)
    if d == 0 or any(len(r) != d for r in rows):
        raise ValueError("matrix must be square with dim >= 1")
    return rows


def _as_int(v):
    if isinstance(v, Fraction):
        if v.denominator != 1:
            raise ValueError(f"non-integer entry {v}")
        return v.numerator
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError(f"non-integer entry {v}")
        return int(v)
    return operator.index(v)


def _as_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v)
    return Fraction(operator.index(v))


def _mul(a, b):
    n, m, p = len(a), len(b), len(b[0])
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(m)) for j in range(p)) for i in range(n)
    )


def _matvec(a, v):
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


class _Matrix:
    rows: tuple

    @property
    def dim(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __iter__(self):
        return iter(self.rows)

    def to_list(self):
        return [list(r) for r in self.rows]

    def transpose(self):
        return type(self)(tuple(zip(*self.rows)))

    def apply(self, v):
        """Matrix-vector product with exact arithmetic."""
        return _matvec(self.rows, v)

    def to_numpy(self):
        import numpy as np

        return np.array([[float(x) for x in r] for r in self.rows])

    def __matmul__(self, other):
        if isinstance(other, _Matrix):
            prod = _mul(self.rows, other.rows)
            if isinstance(self, IntegerMatrix) and isinstance(other, IntegerMatrix):
                return IntegerMatrix(prod)
            return RationalMatrix(prod)
        return _matvec(self.rows, other)

    def _zip(self, other, op):
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        rows = tuple(tuple(op(x, y) for x, y in zip(r, s)) for r, s in zip(self.rows, other.rows))
        if isinstance(self, IntegerMatrix) and isinstance(other, IntegerMatrix):
            return IntegerMatrix(rows)
        return RationalMatrix(rows)

    def __add__(self, other):
        return self._zip(other, operator.add)

    def __sub__(self, other):
        return self._zip(other, operator.sub)

    def __neg__(self):
        return type(self)(tuple(tuple(-x for x in r) for r in self.rows))


@dataclass(frozen=True)
class IntegerMatrix(_Matrix):
    """Square matrix of arbitrary-precision integers."""

    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", _square(self.rows, _as_int))

    @classmethod
    def identity(cls, d: int) -> "IntegerMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))

    @classmethod
    def diag(cls, entries) -> "IntegerMatrix":
        d = len(entries)
        return cls(tuple(tuple(entries[i] if i == j else 0 for j in range(d)) for i in range(d)))

    @classmethod
    def parse(cls, text: str) -> "IntegerMatrix":
        """Read ``[[a, b], [c, d]]`` (JSON) or the compact ``"d; a11 a12 ..."`` form."""
        text = text.strip()
        if text.startswith("["):
            data = json.loads(text)
            if data and not isinstance(data[0], list):
                data = [data]
            return cls(data)
        head, _, body = text.partition(";")
        d = int(head)
        vals = [int(t) for t in body.replace(",", " ").split()]
        if len(vals) != d * d:
            raise ValueError(f"expected {d * d} entries, got {len(vals)}")
        return cls(tuple(tuple(vals[i * d:(i + 1) * d]) for i in range(d)))

    def to_rational(self) -> "RationalMatrix":
        return RationalMatrix(self.rows)


@dataclass(frozen=True)
class RationalMatrix(_Matrix):
    """Square matrix of exact rationals (``Fraction`` keeps lowest terms)."""

    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", _square(self.rows, _as_fraction))

    @classmethod
    def identity(cls, d: int) -> "RationalMatrix":
        return cls(IntegerMatrix.identity(d).rows)

    def is_integral(self) -> bool:
        return all(x.denominator == 1 for r in self.rows for x in r)

    def to_integer(self) -> IntegerMatrix:
        return IntegerMatrix(self.rows)

    def common_denominator(self) -> int:
        return reduce(math.lcm, (x.denominator for r in self.rows for x in r), 1)

    def inverse(self) -> "RationalMatrix":
        return RationalMatrix(_gauss_jordan_inverse(self.rows))


def _gauss_jordan_inverse(rows):
    d = len(rows)
    a = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(d)] for i, r in enumerate(rows)]
    for c in range(d):
        p = next((i for i in range(c, d) if a[i][c] != 0), None)
        if p is None:
            raise SingularMatrix("matrix is singular")
        a[c], a[p] = a[p], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for i in range(d):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return tuple(tuple(r[d:]) for r in a)


def solve(rows, rhs):
    """Solve ``rows @ x = rhs`` exactly over the rationals."""
    d = len(rows)
    a = [[Fraction(x) for x in r] + [Fraction(b)] for r, b in zip(rows, rhs)]
    for c in range(d):
        p = next((i for i in range(c, d) if a[i][c] != 0), None)
        if p is None:
            raise SingularMatrix("matrix is singular")
        a[c], a[p] = a[p], a[c]
        for i in range(c + 1, d):
            if a[i][c] != 0:
                f = a[i][c] / a[c][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    x = [Fraction(0)] * d
    for i in reversed(range(d)):
        s = a[i][d] - sum(a[i][j] * x[j] for j in range(i + 1, d))
        x[i] = s / a[i][i]
    return tuple(x)


def nullspace(rows):
    """Basis of the right nullspace over Q, from the reduced row echelon form."""
    d = len(rows[0])
    a = [[Fraction(x) for x in r] for r in rows]
    pivots = []
    r = 0
    for c in range(d):
        p = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    free = [c for c in range(d) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * d
        v[f] = Fraction(1)
        for i, c in enumerate(pivots):
            v[c] = -a[i][f]
        basis.append(tuple(v))
    return basis


def matrix_power(A: IntegerMatrix, n: int) -> IntegerMatrix:
    """Exact ``A**n`` by binary exponentiation (``n = 0`` gives the identity)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return _matrix_power_cached(A, n)


@lru_cache(maxsize=256)
def _matrix_power_cached(A, n):
    result = IntegerMatrix.identity(A.dim).rows
    base = A.rows
    while n:
        if n & 1:
            result = _mul(result, base)
        n >>= 1
        if n:
            base = _mul(base, base)
    return IntegerMatrix(result)


def shifted_power(A: IntegerMatrix, n: int) -> IntegerMatrix:
    """``A**n - I``, the matrix whose kernel mod 1 is the period-n set."""
    return matrix_power(A, n) - IntegerMatrix.identity(A.dim)


def det_exact(M) -> int:
    """Determinant by Bareiss fraction-free elimination."""
    if isinstance(M, RationalMatrix):
        return _det_rational(M.rows)
    rows = M.rows if isinstance(M, _Matrix) else _square(M, _as_int)
    a = [list(r) for r in rows]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            p = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if p is None:
                return 0
            a[k], a[p] = a[p], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _det_rational(rows):
    a = [list(r) for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if a[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        for i in range(c + 1, n):
            if a[i][c] != 0:
                f = a[i][c] / a[c][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return det


def adjugate(M: IntegerMatrix) -> IntegerMatrix:
    """Integer adjugate, so that ``M @ adj(M) = det(M) * I``."""
    d = M.dim
    if d == 1:
        return IntegerMatrix(((1,),))
    out = [[0] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(M.rows) if k != i]
            out[j][i] = (-1) ** (i + j) * det_exact(IntegerMatrix(minor))
    return IntegerMatrix(out)


def char_poly(A: IntegerMatrix) -> list:
    """Coefficients of ``det(xI - A)``, leading first, by Berkowitz's division-free recursion."""
    a = A.rows
    d = A.dim
    p = [1, -a[d - 1][d - 1]]
    for k in range(d - 2, -1, -1):
        sub = [row[k + 1:] for row in a[k + 1:]]
        R = a[k][k + 1:]
        v = [a[i][k] for i in range(k + 1, d)]
        m = d - k - 1
        col = [1, -a[k][k]]
        for _ in range(m):
            col.append(-sum(x * y for x, y in zip(R, v)))
            v = list(_matvec(sub, v))
        p = [sum(col[i - j] * p[j] for j in range(m + 1) if 0 <= i - j < len(col)) for i in range(m + 2)]
    return p


def poly_eval_matrix(coeffs, A: IntegerMatrix) -> IntegerMatrix:
    """Horner evaluation of an integer polynomial at a matrix."""
    d = A.dim
    acc = IntegerMatrix(((0,) * d,) * d)
    eye = IntegerMatrix.identity(d)
    for c in coeffs:
        acc = acc @ A + IntegerMatrix(tuple(tuple(c * x for x in r) for r in eye.rows))
    return acc


@dataclass(frozen=True)
class SnfDecomposition:
    """``M = U @ S @ V`` with ``U, V`` unimodular and ``S`` diagonal, s_1 | s_2 | ... ."""

    U: IntegerMatrix
    S: IntegerMatrix
    V: IntegerMatrix
    V_inv: IntegerMatrix

    @property
    def invariant_factors(self) -> tuple:
        return tuple(self.S.rows[i][i] for i in range(self.S.dim))


def smith_normal_form(M: IntegerMatrix) -> SnfDecomposition:
    """Smith normal form with transforms.

    Pivot choice is the smallest nonzero absolute value in the active block,
    ties broken by (row, column), which keeps the output deterministic.
    """
    if det_exact(M) == 0:
        raise SingularMatrix("Smith form requested for a singular matrix")
    d = M.dim
    a = [list(r) for r in M.rows]
    eye = lambda: [[int(i == j) for j in range(d)] for i in range(d)]
    L, U = eye(), eye()  # L @ M @ R = S, U = L^-1
    R, V = eye(), eye()  # V = R^-1

    def row_swap(i, j):
        a[i], a[j] = a[j], a[i]
        L[i], L[j] = L[j], L[i]
        for r in U:
            r[i], r[j] = r[j], r[i]

    def col_swap(i, j):
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in R:
            r[i], r[j] = r[j], r[i]
        V[i], V[j] = V[j], V[i]

    def row_addmul(dst, src, q):  # row dst += q * row src
        a[dst] = [x + q * y for x, y in zip(a[dst], a[src])]
        L[dst] = [x + q * y for x, y in zip(L[dst], L[src])]
        for r in U:
            r[src] -= q * r[dst]

    def col_addmul(dst, src, q):  # col dst += q * col src
        for r in a:
            r[dst] += q * r[src]
        for r in R:
            r[dst] += q * r[src]
        V[src] = [x - q * y for x, y in zip(V[src], V[dst])]

    for t in range(d):
        while True:
            best = None
            for i in range(t, d):
                for j in range(t, d):
                    v = abs(a[i][j])
                    if v and (best is None or v < best[0]):
                        best = (v, i, j)
            _, pi, pj = best
            if pi != t:
                row_swap(pi, t)
            if pj != t:
                col_swap(pj, t)
            p = a[t][t]
            dirty = False
            for i in range(t + 1, d):
                if a[i][t]:
                    row_addmul(i, t, -(a[i][t] // p))
                    dirty = dirty or a[i][t] != 0
            for j in range(t + 1, d):
                if a[t][j]:
                    col_addmul(j, t, -(a[t][j] // p))
                    dirty = dirty or a[t][j] != 0
            if dirty:
                continue
            bad = next(
                (i for i in range(t + 1, d) for j in range(t + 1, d) if a[i][j] % p), None
            )
            if bad is None:
                break
            row_addmul(t, bad, 1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            L[t] = [-x for x in L[t]]
            for r in U:
                r[t] = -r[t]
    return SnfDecomposition(IntegerMatrix(U), IntegerMatrix(a), IntegerMatrix(V), IntegerMatrix(R))


# ---------------------------------------------------------------------------
# polynomial helpers (coefficients leading first, Fraction entries)


def _ptrim(p):
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def _pdivmod(num, den):
    num = [Fraction(x) for x in num]
    den = _ptrim([Fraction(x) for x in den])
    if len(num) < len(den):
        return [Fraction(0)], _ptrim(num)
    q = []
    rem = list(num)
    for _ in range(len(num) - len(den) + 1):
        c = rem[0] / den[0]
        q.append(c)
        rem = [x - c * y for x, y in zip(rem, den + [0] * (len(rem) - len(den)))][1:]
    return q, _ptrim(rem) if rem else [Fraction(0)]


def _pmonic(p):
    p = _ptrim(p)
    return [x / p[0] for x in p]


def _pgcd(a, b):
    a, b = _ptrim(a), _ptrim(b)
    while not (len(b) == 1 and b[0] == 0):
        a, b = b, _pdivmod(a, b)[1]
    return _pmonic(a)


def _pderiv(p):
    n = len(p) - 1
    return [c * (n - i) for i, c in enumerate(p[:-1])] or [Fraction(0)]


def squarefree_factors(coeffs) -> list:
    """Yun's algorithm: ``[(factor, multiplicity), ...]`` with monic squarefree factors."""
    f = _pmonic([Fraction(c) for c in coeffs])
    if len(f) == 1:
        return []
    a = _pgcd(f, _pderiv(f))
    b = _pdivmod(f, a)[0]
    c = _pdivmod(_pderiv(f), a)[0]
    dd = [x - y for x, y in _pad(c, _pderiv(b))]
    out = []
    i = 1
    while len(b) > 1:
        g = _pgcd(b, dd)
        if len(g) > 1:
            out.append((g, i))
        b = _pdivmod(b, g)[0]
        c = _pdivmod(dd, g)[0]
        dd = [x - y for x, y in _pad(c, _pderiv(b))]
        i += 1
    return out


def _pad(p, q):
    n = max(len(p), len(q))
    return zip([Fraction(0)] * (n - len(p)) + list(p), [Fraction(0)] * (n - len(q)) + list(q))


def _certified_roots(poly, prec):
    """Approximate roots of a squarefree polynomial with inclusion radii.

    Disks D(z_i, m |q(z_i)| / prod_{j != i} |z_i - z_j|) contain all roots, and
    a connected cluster of k disks holds exactly k roots.
    """
    m = len(poly) - 1
    if m == 1:
        z = -mpmath.mpf(poly[1].numerator) / poly[1].denominator
        return [(mpmath.mpc(z), [0])], [mpmath.mpf(0)]
    coeffs = [mpmath.mpf(c.numerator) / c.denominator for c in poly]
    zs = mpmath.polyroots(coeffs, maxsteps=200 + 20 * m, extraprec=prec)
    zs = [mpmath.mpc(z) for z in zs]
    radii = []
    with mp.workprec(2 * prec):
        for i, z in enumerate(zs):
            val = mpmath.polyval(coeffs, z)
            den = mpmath.fprod(abs(z - w) for j, w in enumerate(zs) if j != i)
            if den == 0:
                raise PrecisionFailure("root approximations collided")
            radii.append(2 * m * abs(val) / den + mpmath.ldexp(abs(z) + 1, -prec + 8))
    # cluster overlapping disks
    comp = list(range(m))

    def find(i):
        while comp[i] != i:
            comp[i] = comp[comp[i]]
            i = comp[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if abs(zs[i] - zs[j]) <= radii[i] + radii[j]:
                comp[find(i)] = find(j)
    return [(z, [k for k in range(m) if find(k) == find(i)]) for i, z in enumerate(zs)], radii


def eigen_moduli(A: IntegerMatrix, tol: float = 1e-20):
    """Certified eigenvalue moduli of ``A``, ascending, as a :class:`Spectrum`.

    Repeated roots are separated first with a squarefree decomposition, so the
    inclusion disks stay tight. Integer eigenvalues are detected and kept exact.
    """
    from .spectrum_dim import Spectrum

    return _eigen_moduli_cached(A, float(tol), Spectrum)


@lru_cache(maxsize=128)
def _eigen_moduli_cached(A, tol, Spectrum):
    coeffs = char_poly(A)
    factors = squarefree_factors(coeffs)
    prec = 128
    while prec <= 4096:
        with mp.workprec(prec):
            entries = []  # (modulus, radius, eigenvalue, exact-or-None)
            ok = True
            for poly, mult in factors:
                int_roots = _integer_roots(poly)
                if int_roots is not None:
                    for r in int_roots:
                        entries += [(mpmath.mpf(abs(r)), mpmath.mpf(0), mpmath.mpc(r), r)] * mult
                    continue
                roots, radii = _certified_roots(poly, prec)
                for (z, cluster), _ in zip(roots, radii):
                    lo = min(abs(roots[k][0]) - radii[k] for k in cluster)
                    hi = max(abs(roots[k][0]) + radii[k] for k in cluster)
                    mid = abs(z)
                    rad = max(mid - lo, hi - mid)
                    if rad > tol:
                        ok = False
                    entries += [(mid, rad, z, None)] * mult
            if ok:
                entries.sort(key=lambda e: (e[0], float(e[2].real), float(e[2].imag)))
                exact = tuple(e[3] for e in entries)
                return Spectrum(
                    moduli=tuple(e[0] for e in entries),
                    radii=tuple(e[1] for e in entries),
                    eigenvalues=tuple(e[2] for e in entries),
                    exact=exact if all(x is not None for x in exact) else None,
                    tol=tol,
                )
        prec *= 2
    raise PrecisionFailure(f"could not certify eigenvalue moduli to tol={tol}")


def _integer_roots(poly):
    """All roots if every root of the monic rational ``poly`` is an integer, else None."""
    if any(c.denominator != 1 for c in poly):
        return None
    roots = []
    p = [int(c) for c in poly]
    while len(p) > 1:
        c0 = p[-1]
        if c0 == 0:
            cand = [0]
        else:
            cand = [s * k for k in _divisors(abs(c0)) for s in (1, -1)]
        r = next((x for x in cand if _ieval(p, x) == 0), None)
        if r is None:
            return None
        roots.append(r)
        q, _ = _pdivmod(p, [1, -r])
        p = [int(c) for c in q]
    return roots


def _ieval(p, x):
    acc = 0
    for c in p:
        acc = acc * x + c
    return acc


def _divisors(n):
    small, large = [], []
    for k in range(1, math.isqrt(n) + 1):
        if n % k == 0:
            small.append(k)
            if k != n // k:
                large.append(n // k)
    return small + large[::-1]
