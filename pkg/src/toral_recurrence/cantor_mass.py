"""A finite-depth Cantor-type subset of the recurrence set, with its natural mass distribution.

Levels ``n_1 < n_2 < ...`` are chosen so that each degree-``n_{j+1}`` ellipsoid
is far smaller than the gaps inside a degree-``n_j`` one. Level j of the tree
holds the degree-``n_j`` ellipsoids nested in a level ``j-1`` node; a parent's
mass is split equally among its children, all in exact rationals.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .certify import (
    frac, max_norm_sq_over_ball_upper, norm_sq, sigma_max_sq_upper, sqrt_upper, torus_diff,
)
from .errors import AmbiguousComparison, CapExceeded, EmptyLevel, HypothesisViolated, Infeasible
from .exact_linalg import IntegerMatrix, adjugate, det_exact, eigen_moduli, shifted_power
from .periodic_lattice import count_periodic, enumerate_periodic
from .recurrence_geometry import psi_value
from .spectrum_dim import RateFunction, is_infinite, log_ratio_sign

DEFAULT_HORIZON = 200
DEFAULT_NODE_CAP = 200_000


def _fstr(q):
    if isinstance(q, Fraction):
        return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)
    return q


def _num(x):
    """Fractions stay exact; everything else becomes an exact Fraction of its float value."""
    return x if isinstance(x, (int, Fraction)) else Fraction(float(x))


# ------------------------------------------------------------ levels

@dataclass(frozen=True)
class LevelSequence:
    levels: tuple
    ratios: tuple  # sum_{i<j} n_i / n_j, 0 for the first level

    def to_json(self):
        return {"levels": list(self.levels), "ratios": [float(r) for r in self.ratios]}


def _growth_extremes(A, n):
    g = eigen_moduli(A).growth(n)
    return _num(min(g)), _num(max(g))


def separated(A: IntegerMatrix, psi, n: int, m: int) -> bool:
    """``psi(n) / max_j |lambda_j^n - 1| > 1 / min_j |lambda_j^m - 1|``."""
    _, gmax = _growth_extremes(A, n)
    gmin, _ = _growth_extremes(A, m)
    return _num(psi_value(psi, n)) * gmin > gmax


def select_levels(A: IntegerMatrix, psi: RateFunction, J: int, ratio_threshold: float = 0.5,
                  horizon: int | None = None) -> LevelSequence:
    """Greedy minimal levels meeting the separation and ratio conditions.

    ``n_1`` is the first n with ``psi(n) < 1/3``. Each later level is the
    smallest n keeping every degree-n ellipsoid below the gap scale of the
    previous level, with ``sum_{i<j} n_i / n_j <= ratio_threshold`` and, from the
    third level on, a strictly smaller ratio than the previous one.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if horizon is None:
        horizon = psi.horizon or DEFAULT_HORIZON
    thr = Fraction(ratio_threshold)
    n1 = next((n for n in range(1, horizon + 1) if _num(psi.psi(n)) < Fraction(1, 3)), None)
    if n1 is None:
        raise Infeasible(f"psi(n) never drops below 1/3 up to n={horizon}")
    levels, ratios = [n1], [Fraction(0)]
    while len(levels) < J:
        total = sum(levels)
        prev = levels[-1]
        chosen = None
        for n in range(prev + 1, horizon + 1):
            ratio = Fraction(total, n)
            if ratio > thr:
                continue
            if len(levels) >= 2 and not ratio < ratios[-1]:
                continue
            if separated(A, psi, prev, n):
                chosen = n
                break
        if chosen is None:
            raise Infeasible(f"no admissible level after n={prev} up to horizon {horizon}")
        levels.append(chosen)
        ratios.append(Fraction(total, chosen))
    return LevelSequence(tuple(levels), tuple(ratios))


# ------------------------------------------------------------ containment

def contains_conservative(a, B, rho, psi_p) -> bool:  # single-candidate form of the test in _children
    """Sufficient test for ``|a + B u| < psi_p`` on ``|u| <= rho``: ``|a| + rho sigma_max(B) < psi_p``."""
    if len(a) == 1:
        return abs(a[0]) + rho * abs(B[0][0]) < psi_p
    return sqrt_upper(norm_sq(a)) + rho * sqrt_upper(sigma_max_sq_upper(B)) < psi_p


def contains_fine(a, B, rho, psi_p) -> bool:
    """Tighter sufficient test through the S-lemma dual bound."""
    ub = max_norm_sq_over_ball_upper(a, B, rho)
    return ub is not None and ub < psi_p * psi_p


@dataclass
class Node:
    level: int
    center: tuple
    mass: Fraction
    parent: int | None = None
    children: list = field(default_factory=list)

    def to_json(self):
        return {"center": [_fstr(c) for c in self.center], "mass": _fstr(self.mass),
                "parent": self.parent, "children": len(self.children)}


@dataclass
class MassTree:
    matrix: IntegerMatrix
    rate: RateFunction
    seq: LevelSequence
    levels: list  # list of lists of Node
    radii: tuple  # psi(n_j), exact where possible
    conservative_counts: tuple  # children accepted by the cheap test, per level
    fine_counts: tuple  # extra children accepted only by the finer test

    @property
    def depth(self) -> int:
        return len(self.levels)

    def leaves(self):
        return self.levels[-1]

    def level_mass(self, j: int) -> Fraction:
        return sum((nd.mass for nd in self.levels[j - 1]), Fraction(0))

    def conserved(self) -> bool:
        """Every node's children carry exactly its mass, and each level has mass 1."""
        for j in range(1, self.depth):
            for nd in self.levels[j - 1]:
                if sum((self.levels[j][c].mass for c in nd.children), Fraction(0)) != nd.mass:
                    return False
        return all(self.level_mass(j) == 1 for j in range(1, self.depth + 1))

    def to_json(self):
        return {
            "levels": list(self.seq.levels),
            "ratios": [float(r) for r in self.seq.ratios],
            "psi": [_fstr(r) for r in self.radii],
            "conservative_counts": list(self.conservative_counts),
            "fine_counts": list(self.fine_counts),
            "level_mass": [_fstr(self.level_mass(j)) for j in range(1, self.depth + 1)],
            "nodes": [[nd.to_json() for nd in lvl] for lvl in self.levels],
        }


def lattice_points_in_ellipsoid(Q, c, r, pad: float = 1.0) -> np.ndarray:
    """Integer points ``z`` with ``(z - c)^T Q (z - c) < r^2``, padded outward by ``pad``.

    Coordinates are fixed one at a time; for each prefix the admissible range of
    the next coordinate comes from the Schur complement of the slice. The float
    ranges are widened by ``pad`` so the result is a superset, to be filtered exactly.
    """
    d = len(c)
    out = []

    def rec(prefix, Qr, cr, rem):
        # Qr, cr: form and center of the slice in the remaining coordinates; rem: its squared radius
        k = len(prefix)
        if rem < -tol:
            return
        inv = np.linalg.inv(Qr)
        half = math.sqrt(max(rem, 0.0) * inv[0, 0])
        lo = math.floor(cr[0] - half - pad)
        hi = math.ceil(cr[0] + half + pad)
        if k == d - 1:
            out.extend(prefix + [z] for z in range(lo, hi + 1))
            return
        q11, q1r, qrr = Qr[0, 0], Qr[0, 1:], Qr[1:, 1:]
        for z in range(lo, hi + 1):
            t = z - cr[0]
            # minimize over the rest: center shifts by -qrr^{-1} q1r t
            shift = np.linalg.solve(qrr, q1r) * t
            base = q11 * t * t - t * (q1r @ shift)
            rec(prefix + [z], qrr, cr[1:] - shift, rem - base)

    tol = 1e-9 * r * r
    rec([], np.asarray(Q, dtype=float), np.asarray(c, dtype=float), r * r)
    if not out:
        return np.zeros((0, d), dtype=object)
    return np.array(out, dtype=object)


def _children(A, center, n_p, psi_p, n_c, psi_c):
    """Degree-``n_c`` ellipsoids strictly inside the degree-``n_p`` one at ``center``.

    Candidate centers solve ``M_c x = z`` for integer ``z`` in the bounding box of
    ``M_c (center + M_p^{-1} B(0, psi_p))``. With ``x = adj(M_c) z / D`` and
    ``center = p / L`` the offset ``a = M_p (x - center)`` has the integer numerator
    ``L M_p adj(M_c) z - D M_p p`` over ``D L``, so both the center test and the
    conservative containment test are exact integer comparisons.
    """
    d = A.dim
    Mp_i = shifted_power(A, n_p)
    Mc_i = shifted_power(A, n_c)
    Mp = Mp_i.to_rational()
    Mc = Mc_i.to_rational()
    Bmat = (Mp @ Mc.inverse()).rows
    adj = adjugate(Mc_i)
    D = det_exact(Mc_i)
    L = math.lcm(*(c.denominator for c in center))
    pnum = [int(c * L) for c in center]
    zc = np.array([float(v) for v in Mc.apply(center)])
    Bf = np.array([[float(v) for v in row] for row in Bmat])
    Z = lattice_points_in_ellipsoid(Bf.T @ Bf, zc, float(psi_p))
    G = np.array((Mp_i @ adj).rows, dtype=object)
    off = np.array(Mp_i.apply(pnum), dtype=object) * D
    num = (Z @ G.T) * L - off  # numerators of a over D L
    den2 = (D * L) ** 2
    sq = (num * num).sum(axis=1)
    # |a| < psi_p  <=>  sq * q^2 < p^2 den2  with psi_p = p/q
    pp, qq = psi_p.numerator, psi_p.denominator
    inside = np.nonzero(sq * qq * qq < pp * pp * den2)[0]
    smax = abs(Bmat[0][0]) if d == 1 else sqrt_upper(sigma_max_sq_upper(Bmat))
    t = psi_p - psi_c * smax  # conservative: |a| < t
    sgn = 1 if D > 0 else -1
    W = (Z[inside] @ np.array(adj.rows, dtype=object).T) * sgn % (D * sgn)
    cons, fine = [], []
    seen = set()
    for row, i in zip(W, inside):
        key = tuple(int(v) for v in row)
        if key in seen:
            continue
        seen.add(key)
        if t > 0 and sq[i] * t.denominator ** 2 < t.numerator ** 2 * den2:
            cons.append(key)
        elif d > 1:
            a_vec = [Fraction(int(v), D * L) for v in num[i]]
            if contains_fine(a_vec, Bmat, psi_c, psi_p):
                fine.append(key)
    to_point = lambda k: tuple(Fraction(v, D * sgn) for v in k)
    return [to_point(k) for k in sorted(cons)], [to_point(k) for k in sorted(fine)]


def build_tree(A: IntegerMatrix, psi: RateFunction, seq: LevelSequence,
               node_cap: int = DEFAULT_NODE_CAP) -> MassTree:
    """Nested ellipsoid tree with equal mass splitting.

    An exponential rate must satisfy ``alpha > log(m_d / m_1)`` strictly; along a
    subsequence at the threshold, pass a psi table instead.
    """
    if psi.kind == "exponential" and not is_infinite(psi.alpha):
        spec = eigen_moduli(A)
        sign = log_ratio_sign(spec, spec.d - 1, 0, psi.alpha)
        if sign is None:
            raise AmbiguousComparison("cannot decide alpha against log(m_d/m_1)")
        if sign >= 0:
            raise HypothesisViolated("tree construction needs alpha > log(m_d/m_1) strictly")
    levels = seq.levels
    radii = tuple(_num(psi.psi(n)) for n in levels)
    H1 = count_periodic(A, levels[0])
    if H1 > node_cap:
        raise CapExceeded(H1, node_cap)
    first = [Node(1, c, Fraction(1, H1)) for c in enumerate_periodic(A, levels[0], node_cap).points()]
    tree_levels = [first]
    cons_counts, fine_counts = [H1], [0]
    for j in range(1, len(levels)):
        nxt = []
        nc = nf = 0
        for pi, parent in enumerate(tree_levels[-1]):
            cons, fine = _children(A, parent.center, levels[j - 1], radii[j - 1], levels[j], radii[j])
            kids = sorted(cons + fine)
            if not kids:
                raise EmptyLevel(f"node {pi} at level {j} has no admissible children")
            nc += len(cons)
            nf += len(fine)
            share = parent.mass / len(kids)
            for c in kids:
                parent.children.append(len(nxt))
                nxt.append(Node(j + 1, c, share, pi))
            if len(nxt) > node_cap:
                raise CapExceeded(len(nxt), node_cap)
        tree_levels.append(nxt)
        cons_counts.append(nc)
        fine_counts.append(nf)
    return MassTree(A, psi, seq, tree_levels, radii, tuple(cons_counts), tuple(fine_counts))


# ------------------------------------------------------------ mass bounds

@dataclass(frozen=True)
class MassBoundsReport:
    C1: float
    per_level: tuple  # (level, min ratio, max ratio, nodes)
    flagged_levels: tuple  # levels excluded because the count hypothesis fails along the ancestry

    def to_json(self):
        return {"C1": self.C1, "per_level": [
            {"level": j, "min_ratio": lo, "max_ratio": hi, "nodes": k} for j, lo, hi, k in self.per_level],
            "flagged_levels": list(self.flagged_levels)}


def count_hypothesis(A: IntegerMatrix, psi_n, n: int, m: int) -> bool:
    """``l_{n,d} (lambda_1^m - 1) / sqrt(d) > 1`` with ``l_{n,d} = 2 psi(n) / |lambda_d^n - 1|``."""
    d = A.dim
    _, gmax = _growth_extremes(A, n)
    gmin, _ = _growth_extremes(A, m)
    lhs = 2 * _num(psi_n) * gmin / gmax
    return lhs * lhs > d


def model_mass(tree: MassTree, j: int):
    """``H_{n_j}^{-1} prod_{k<j} psi(n_k)^{-d}``."""
    d = tree.matrix.dim
    out = Fraction(1, count_periodic(tree.matrix, tree.seq.levels[j - 1]))
    for k in range(j - 1):
        out /= tree.radii[k] ** d
    return out


def mass_bounds_check(tree: MassTree) -> MassBoundsReport:
    """Smallest ``C_1`` with every node mass in ``C_1^{+-(j-1)}`` times the model mass."""
    lv = tree.seq.levels
    flagged = []
    bad = False
    C1 = 1.0
    per = []
    for j in range(1, tree.depth + 1):
        if j >= 2 and not count_hypothesis(tree.matrix, tree.radii[j - 2], lv[j - 2], lv[j - 1]):
            bad = True
        model = model_mass(tree, j)
        ratios = [nd.mass / model for nd in tree.levels[j - 1]]
        lo, hi = min(ratios), max(ratios)
        per.append((j, float(lo), float(hi), len(ratios)))
        if bad:
            flagged.append(j)
            continue
        if j == 1:
            if lo != 1 or hi != 1:
                C1 = math.inf
            continue
        worst = max(float(hi), float(1 / lo))
        C1 = max(C1, worst ** (1.0 / (j - 1)))
    return MassBoundsReport(C1, tuple(per), tuple(flagged))


# ------------------------------------------------------------ ball covers

@dataclass(frozen=True)
class BallCover:
    bound_product: int
    empirical: int | None

    def to_json(self):
        return {"bound_product": self.bound_product, "empirical": self.empirical}


def ball_cover_count(center, r1, ell, r3, A: IntegerMatrix | None = None,
                     grid_step: float | None = None) -> BallCover:
    """Balls of radius ``r3`` needed to cover ``B(center, r1)`` intersected with ``ell``.

    Returns the product bound built from the semi-axes ``psi / |lambda_i^n - 1|``
    and, for d <= 2, an empirical count of grid cells of side ``2 r3 / sqrt(d)``
    (each inside one ball) meeting a dense sample of the intersection.
    The growth factors are eigenvalue moduli of ``A^n - I``; pass ``A`` to read
    them from its spectrum instead.
    """
    if r3 > r1:
        raise ValueError("need r3 <= r1")
    if A is not None:
        growth = sorted(float(g) for g in eigen_moduli(A).growth(ell.degree))
    else:
        growth = eigen_moduli(ell.shape).as_floats()
    r2 = float(ell.psi)
    prod = 1
    for g in growth:
        a = r2 / g
        if r1 <= a:
            prod *= math.ceil(r1 / r3)
        elif a > r3:
            prod *= math.ceil(a / r3)
    d = len(ell.center)
    emp = None
    if d == 1:
        c = float(torus_diff((frac(center[0]),), ell.center)[0])
        a = r2 / growth[0]
        lo, hi = max(-a, c - r1), min(a, c + r1)
        emp = 0 if hi <= lo else math.ceil((hi - lo) / (2 * r3))
    elif d == 2:
        emp = _grid_cover_2d(center, r1, ell, r3, grid_step)
    return BallCover(prod, emp)


def _grid_cover_2d(center, r1, ell, r3, step):
    M = ell.shape.to_numpy().astype(float)
    Minv = np.linalg.inv(M)
    psi = float(ell.psi)
    off = np.array([float(v) for v in torus_diff(tuple(frac(v) for v in center), ell.center)])
    side = 2 * r3 / math.sqrt(2)
    step = step or side / 6
    ext = psi * np.linalg.norm(Minv, axis=1)
    lo = np.maximum(-ext, off - r1)
    hi = np.minimum(ext, off + r1)
    if np.any(hi <= lo):
        return 0
    xs = np.arange(lo[0], hi[0] + step, step)
    ys = np.arange(lo[1], hi[1] + step, step)
    if xs.size * ys.size > 4_000_000:
        raise CapExceeded(xs.size * ys.size, 4_000_000)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = (np.linalg.norm(P @ M.T, axis=1) < psi) & (np.linalg.norm(P - off, axis=1) < r1)
    cells = np.floor(P[inside] / side).astype(np.int64)
    if cells.size == 0:
        return 0
    return int(np.unique(cells, axis=0).shape[0])


# ------------------------------------------------------------ local dimension

def _dist_to_ellipsoids(p, centers, Q_eig, Q_vec, psi):
    """Euclidean torus distance from ``p`` to ellipsoids ``{y : (y-c)^T Q (y-c) <= psi^2}``.

    Solves the secular equation ``sum q_i w_i^2 / (1 + t q_i)^2 = psi^2`` by bisection,
    vectorized over centers and the 3^d nearest translates.
    """
    n, d = centers.shape
    base = p[None, :] - centers
    base -= np.round(base)
    shifts = np.array(list(product((-1, 0, 1), repeat=d)), dtype=float)
    v = (base[None, :, :] + shifts[:, None, :]).reshape(-1, d)
    w = v @ Q_vec  # coordinates in the eigenbasis of Q
    ww = Q_eig * w * w
    inside = ww.sum(axis=1) <= psi * psi
    f = lambda t: (ww / (1 + t[:, None] * Q_eig) ** 2).sum(axis=1) - psi * psi
    lo = np.zeros(len(w))
    hi = np.ones(len(w))
    need = f(hi) > 0
    while need.any():
        hi[need] *= 2
        need = f(hi) > 0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    y = w / (1 + hi[:, None] * Q_eig)
    dist = np.linalg.norm(w - y, axis=1)
    dist[inside] = 0.0
    return dist.reshape(len(shifts), n).min(axis=0)


@dataclass(frozen=True)
class LocalDimSample:
    x: tuple
    r: float
    mass: Fraction
    quotient: float


@dataclass(frozen=True)
class LocalDimReport:
    seed: int | None
    samples: tuple
    minimum: float

    def to_json(self):
        return {"seed": self.seed, "minimum": self.minimum, "samples": [
            {"x": list(s.x), "r": s.r, "mass": _fstr(s.mass), "quotient": s.quotient}
            for s in self.samples]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "r", "mass", "quotient"])
        for s in self.samples:
            w.writerow([" ".join(repr(v) for v in s.x), repr(s.r), _fstr(s.mass), repr(s.quotient)])
        return buf.getvalue()


def ball_mass(tree: MassTree, x, r: float) -> Fraction:
    """Mass of leaves whose ellipsoid comes within ``r`` of ``x``.

    Radii are inflated by a relative 1e-9 so the figure never undercounts.
    """
    d = tree.matrix.dim
    if r >= math.sqrt(d) / 2:
        return Fraction(1)
    leaves = tree.leaves()
    n = tree.seq.levels[-1]
    M = shifted_power(tree.matrix, n).to_numpy().astype(float)
    q, V = np.linalg.eigh(M.T @ M)
    psi = float(tree.radii[-1])
    centers = np.array([[float(c) for c in nd.center] for nd in leaves])
    p = np.asarray(x, dtype=float)
    off = centers - p[None, :]
    off -= np.round(off)
    reach = (r + psi / math.sqrt(q[0])) * (1 + 1e-9)  # ball radius plus the longest semi-axis
    near = np.nonzero(np.linalg.norm(off, axis=1) < reach)[0]
    if near.size == 0:
        return Fraction(0)
    dist = _dist_to_ellipsoids(p, centers[near], q, V, psi)
    hit = near[dist < r * (1 + 1e-9)]
    return sum((leaves[i].mass for i in hit), Fraction(0))


def local_dimension_sample(tree: MassTree, samples: int, radii, seed: int = 0) -> LocalDimReport:
    """``log mu(B(x, r)) / log r`` at sampled points of the leaves.

    Half the centers are leaf centers, half uniform points inside random leaves.
    """
    rng = np.random.default_rng(seed)
    leaves = tree.leaves()
    d = tree.matrix.dim
    n = tree.seq.levels[-1]
    Minv = np.linalg.inv(shifted_power(tree.matrix, n).to_numpy().astype(float))
    psi = float(tree.radii[-1])
    pts = []
    for s in range(samples):
        leaf = leaves[int(rng.integers(len(leaves)))]
        c = np.array([float(v) for v in leaf.center])
        if s % 2 == 1:
            u = rng.normal(size=d)
            u *= rng.random() ** (1.0 / d) / np.linalg.norm(u)
            c = np.mod(c + psi * (Minv @ u), 1.0)
        pts.append(c)
    out = []
    for x in pts:
        for r in radii:
            m = ball_mass(tree, x, float(r))
            qv = math.log(m) / math.log(r) if m < 1 else 0.0
            out.append(LocalDimSample(tuple(float(v) for v in x), float(r), m, qv))
    return LocalDimReport(seed, tuple(out), min((s.quotient for s in out), default=math.nan))
