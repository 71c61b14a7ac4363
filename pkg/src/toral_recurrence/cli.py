"""Command-line entry point: ``toral-recurrence <command> ...``.

Every command writes one JSON document (or CSV with ``--format csv``) whose
header echoes the tool version, the parsed configuration, the seed and the
working precision. Output contains no timestamps, so identical invocations
produce identical bytes.

Exit codes: 0 success, 1 usage error, 2 hypothesis violation, 3 resource cap,
4 precision failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
from mpmath import mp

from . import __version__
from .cantor_mass import (
    DEFAULT_NODE_CAP, ball_cover_count, build_tree, local_dimension_sample, mass_bounds_check,
    select_levels,
)
from .conjugacy import commutation_check, conjugation_holds, lipschitz_sandwich, rational_diagonalize
from .errors import HypothesisViolated, NonIntegerEigenvalues, NotDiagonalizableOverQ, ToralRecurrenceError
from .exact_linalg import IntegerMatrix, eigen_moduli
from .periodic_lattice import (
    DEFAULT_CAP, count_in_ball, count_in_ellipsoid, enumerate_periodic, periodic_set,
)
from .recurrence_geometry import (
    box_count_dimension, decompose_Rn, ellipsoid, ellipsoid_min_distance, semi_axes_sweep,
)
from .spectrum_dim import LogRate, RateFunction, dim_general, dim_rational_diagonal

TOOL = "toral-recurrence"


# ------------------------------------------------------------ serialization

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def to_json(obj, indent: int = 2, level: int = 0) -> str:
    """Deterministic JSON: floats with 17 significant digits, Fractions as ``"p/q"``."""
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, Fraction):
        s = str(obj.numerator) if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
        return _quote(s)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {to_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, frozenset, set)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in seq):
            return "[" + ", ".join(to_json(v, indent, level + 1) for v in seq) + "]"
        items = [pad + to_json(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _quote(str(obj))


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


# ------------------------------------------------------------ argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_LOG_TOKEN = re.compile(r"^(?:ln|log)\s*\(?\s*([0-9]+(?:/[0-9]+)?)\s*\)?$")


def parse_alpha(text: str):
    """``ln2``, ``ln(5/2)``, ``inf``, ``0`` or a decimal."""
    t = text.strip().lower()
    m = _LOG_TOKEN.match(t)
    if m:
        return LogRate(Fraction(m.group(1)))
    if t in ("inf", "infinity"):
        return math.inf
    val = float(t)
    if val < 0 or math.isnan(val):
        raise ValueError(f"alpha must be >= 0, got {text}")
    return 0 if val == 0 else val


def read_psi_table(path: str) -> RateFunction:
    """CSV of ``n,psi`` rows with n = 1..N; values may be decimals or ``p/q``."""
    rows = {}
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                n = int(rec[0])
            except ValueError:
                continue  # header
            rows[n] = Fraction(rec[1].strip())
    if sorted(rows) != list(range(1, len(rows) + 1)):
        raise ValueError("psi table must list n = 1..N without gaps")
    return RateFunction.from_table([rows[n] for n in range(1, len(rows) + 1)])


def _range(text: str) -> range:
    """``a:b`` inclusive, ``a..b`` inclusive, or a single integer."""
    for sep in (":", ".."):
        if sep in text:
            a, b = text.split(sep)
            return range(int(a), int(b) + 1)
    return range(int(text), int(text) + 1)


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def _matrix(args) -> IntegerMatrix:
    if args.matrix_file:
        return IntegerMatrix.parse(Path(args.matrix_file).read_text())
    if args.matrix:
        return IntegerMatrix.parse(args.matrix)
    raise ValueError("need --matrix or --matrix-file")


def _rate(args, required: bool = True):
    if getattr(args, "psi_table", None):
        return read_psi_table(args.psi_table)
    if getattr(args, "alpha", None) is not None:
        return RateFunction.exponential(parse_alpha(args.alpha))
    if required:
        raise ValueError("need --alpha or --psi-table")
    return None


def _common(p: argparse.ArgumentParser, psi: bool = True):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--matrix", help='integer matrix, e.g. "[[3,1],[1,2]]"')
    g.add_argument("--matrix-file", help="file holding the matrix")
    if psi:
        h = p.add_mutually_exclusive_group()
        h.add_argument("--alpha", help='decay rate: "ln2", "ln(5/2)", "inf" or a decimal')
        h.add_argument("--psi-table", help="CSV file of n,psi rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", type=int, default=128, help="mpmath working precision in bits")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL, description="Recurrence sets of toral endomorphisms x -> Ax mod 1.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dim", help="Hausdorff dimension of the recurrence set")
    _common(p)

    p = sub.add_parser("periodic", help="count or list period-n points")
    _common(p, psi=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--list", action="store_true", help="list the points as exact fractions")

    p = sub.add_parser("verify", help="numerical checks of the geometric estimates")
    p.add_argument("target", choices=("semi-axes", "separation", "ball-count", "ellipsoid-count",
                                      "cover", "mass-bounds"))
    _common(p)
    p.add_argument("--n", default=None, help="degree, or a range a:b / a..b for the sweeps")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--nrange", default=None, help="a:b inclusive")
    p.add_argument("--balls", type=int, default=100)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--ratio-threshold", type=float, default=0.5)

    p = sub.add_parser("cantor", help="build the nested ellipsoid tree and its mass distribution")
    _common(p)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--ratio-threshold", type=float, default=0.5)
    p.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP)
    p.add_argument("--samples", type=int, default=0, help="local-dimension samples (0 to skip)")
    p.add_argument("--radii", default="0.01,0.001", help="comma-separated ball radii")

    p = sub.add_parser("boxdim", help="box-counting slope of a union of recurrence sets")
    _common(p)
    p.add_argument("--nrange", required=True, help="a:b inclusive")
    p.add_argument("--scales", required=True, help="s_min:s_max, box side 2^-s")

    p = sub.add_parser("conj", help="rational diagonalization and conjugacy checks")
    _common(p, psi=False)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--radii", default="0.1,0.25")
    p.add_argument("--alpha", default=None, help="also report the transported dimension")
    return parser


# ------------------------------------------------------------ commands

def _header(args, command: str) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func")}
    return {"tool": TOOL, "version": __version__, "command": command, "config": config,
            "seed": args.seed, "precision": args.precision}


def cmd_dim(args):
    A = _matrix(args)
    rate = _rate(args)
    alpha = rate.lower_order
    spec = eigen_moduli(A)
    if not spec.hypothesis_ok:
        raise HypothesisViolated("every eigenvalue must have modulus > 1")
    try:
        rational_diagonalize(A)
        res = dim_rational_diagonal(spec, alpha, hypotheses_verified=True)
        formula = "rational_diagonal"
    except (NonIntegerEigenvalues, NotDiagonalizableOverQ):
        res = dim_general(spec, alpha)
        formula = "general"
    out = res.to_json()
    out["formula"] = formula
    out["alpha"] = str(alpha) if isinstance(alpha, LogRate) else alpha
    if rate.kind == "table":
        out["psi_horizon"] = rate.horizon
    return out, None


def cmd_periodic(args):
    A = _matrix(args)
    if args.list:
        ps = enumerate_periodic(A, args.n, args.cap)
    else:
        ps = periodic_set(A, args.n)
    out = ps.to_json(with_points=args.list)
    rows = None
    if args.list:
        rows = [[f"x{i + 1}" for i in range(A.dim)]] + out["points"]
    return out, rows


def _verify_separation(A, rate, args):
    reports, ok = [], True
    for n in _range(args.nrange or "1:6"):
        fam = decompose_Rn(A, n, rate, args.cap)
        r = ellipsoid_min_distance(fam)
        reports.append({"n": n, **r.to_json()})
        ok &= r.holds
    return {"all_pass": ok, "per_n": reports}


def _verify_semi_axes(A, rate, args):
    sw = semi_axes_sweep(A, rate, list(_range(args.nrange or "1:12")))
    return sw.to_json()


def _verify_ball_count(A, rate, args, rng):
    n = args.n or 6
    ps = enumerate_periodic(A, n, args.cap)
    g = [float(x) for x in eigen_moduli(A).growth(n)]
    r = args.radius if args.radius is not None else min(0.25, 4.0 / min(g))
    rows, ok = [], True
    for _ in range(args.balls):
        c = tuple(Fraction(float(v)) for v in rng.random(A.dim))
        bc = count_in_ball(ps, c, r)
        ok &= bc.within_bound and (bc.ratio is None or 1 / 50 <= bc.ratio <= 50)
        rows.append(bc.to_json())
    ratios = [x["ratio"] for x in rows if x["ratio"] is not None]
    return {"n": n, "r": r, "all_pass": ok, "ratio_min": min(ratios, default=None),
            "ratio_max": max(ratios, default=None), "balls": rows}


def _verify_ellipsoid_count(A, rate, args):
    n, m = args.n or 1, args.m or 6
    pm = enumerate_periodic(A, m, args.cap)
    centers = enumerate_periodic(A, n, args.cap).points()
    ratios, hyp = [], True
    for c in centers:
        res = count_in_ellipsoid(pm, ellipsoid(A, n, rate, c))
        ratios.append(res.ratio)
        hyp &= res.hypothesis_met
    lo, hi = min(ratios), max(ratios)
    return {"n": n, "m": m, "hypothesis_met": hyp, "ellipsoids": len(ratios), "ratio_min": lo,
            "ratio_max": hi, "fitted_C1": max(hi, 1 / lo) if lo > 0 else math.inf,
            "all_pass": lo >= 1 / 50 and hi <= 50}


def _verify_cover(A, rate, args, rng):
    n = args.n or 3
    rows = []
    ell = ellipsoid(A, n, rate, (0,) * A.dim)
    big = max(ell.semi_axes_exact)
    for _ in range(args.balls):
        r1 = float(big * rng.uniform(0.2, 2.0))
        r3 = float(r1 * rng.uniform(0.05, 0.5))
        c = tuple(Fraction(float(v)) for v in rng.normal(scale=big, size=A.dim))
        bc = ball_cover_count(c, r1, ell, r3, A=A)
        rows.append({"r1": r1, "r3": r3, **bc.to_json()})
    worst = max((x["empirical"] / x["bound_product"] for x in rows if x["empirical"] is not None),
                default=None)
    return {"n": n, "worst_ratio": worst, "configs": rows}


def _verify_mass_bounds(A, rate, args):
    seq = select_levels(A, rate, args.levels, args.ratio_threshold)
    tree = build_tree(A, rate, seq)
    rep = mass_bounds_check(tree)
    return {"levels": seq.to_json(), "conserved": tree.conserved(), **rep.to_json()}


def cmd_verify(args):
    if args.n is not None:
        if ":" in args.n or ".." in args.n:
            args.nrange, args.n = args.n, None
        else:
            args.n = int(args.n)
    A = _matrix(args)
    rate = _rate(args)
    rng = np.random.default_rng(args.seed)
    t = args.target
    if t == "separation":
        out = _verify_separation(A, rate, args)
    elif t == "semi-axes":
        out = _verify_semi_axes(A, rate, args)
    elif t == "ball-count":
        out = _verify_ball_count(A, rate, args, rng)
    elif t == "ellipsoid-count":
        out = _verify_ellipsoid_count(A, rate, args)
    elif t == "cover":
        out = _verify_cover(A, rate, args, rng)
    else:
        out = _verify_mass_bounds(A, rate, args)
    return {"target": t, **out}, None


def cmd_cantor(args):
    A = _matrix(args)
    rate = _rate(args)
    seq = select_levels(A, rate, args.levels, args.ratio_threshold)
    tree = build_tree(A, rate, seq, args.node_cap)
    out = {"tree": tree.to_json(), "conserved": tree.conserved(),
           "mass_bounds": mass_bounds_check(tree).to_json()}
    rows = None
    if args.samples:
        rep = local_dimension_sample(tree, args.samples, _floats(args.radii), seed=args.seed)
        out["local_dimension"] = rep.to_json()
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
    return out, rows


def cmd_boxdim(args):
    A = _matrix(args)
    rate = _rate(args)
    fams = [decompose_Rn(A, n, rate, args.cap) for n in _range(args.nrange)]
    bc = box_count_dimension(fams, _range(args.scales))
    rows = [["scale", "count"]] + [[repr(2.0 ** -s), str(c)] for s, c in zip(bc.scales, bc.counts)]
    return bc.to_json(), rows


def cmd_conj(args):
    A = _matrix(args)
    cd = rational_diagonalize(A)
    rng = np.random.default_rng(args.seed)
    comm = commutation_check(cd, A, args.samples, rng)
    sand = lipschitz_sandwich(cd, _floats(args.radii))
    out = {**cd.to_json(), "conjugation_exact": conjugation_holds(cd, A), **comm.to_json(),
           "sandwich": [s.to_json() for s in sand]}
    if args.alpha is not None:
        out["dimension"] = dim_rational_diagonal(
            eigen_moduli(cd.D), parse_alpha(args.alpha), hypotheses_verified=True).to_json()
    return out, None


COMMANDS = {"dim": cmd_dim, "periodic": cmd_periodic, "verify": cmd_verify, "cantor": cmd_cantor,
            "boxdim": cmd_boxdim, "conj": cmd_conj}


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    mp.prec = args.precision
    try:
        payload, rows = COMMANDS[args.command](args)
    except ToralRecurrenceError as e:
        sys.stderr.write(to_json({"error": type(e).__name__, "message": str(e)}) + "\n")
        return e.exit_code
    except ValueError as e:
        sys.stderr.write(to_json({"error": "UsageError", "message": str(e)}) + "\n")
        return 1
    if args.format == "csv" and rows is not None:
        text = _csv_text(rows)
    else:
        text = to_json({"header": _header(args, args.command), "result": payload}) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
