"""``pa``: command-line front end.

Every subcommand builds one report (a JSON-compatible value), validates it
against the schema shipped in ``presburger/schemas`` and writes it once.
Exit codes: 0 success, 1 domain error (bad formula, failed verification,
...), 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import itertools
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import cells as C
from . import heights, powers, qe, semilinear, sparseness
from .formula import (
    FormulaSyntaxError, Not, UnboundVariableError, compile_formula, format_formula, free_vars,
    is_quantifier_free, parse_formula, substitute, Term,
)
from .pwlinear import PWLinearFn

__all__ = ["main", "dispatch", "ExperimentConfig"]


class UsageError(Exception):
    pass


class InvalidParameter(Exception):
    """A well-formed command line with an unusable value (exit 1).

    Raised from argument converters; argparse only intercepts
    ``ValueError``/``TypeError``/``ArgumentTypeError``, so this escapes
    ``parse_args`` instead of becoming a usage error.
    """


@dataclass
class ExperimentConfig:
    """A run of one subcommand, as read from ``--config``.

    ``command`` is the subcommand path (``["sparse", "density"]``) and
    ``params`` maps option names (without dashes, ``-`` or ``_``) to values.
    """

    command: list[str]
    params: dict[str, Any] = field(default_factory=dict)
    format: str = "json"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.command, str):
            self.command = self.command.split()
        if self.format not in ("json", "csv"):
            raise ValueError("format must be json or csv")
        for key in ("windows", "h"):
            ws = self.params.get(key)
            if isinstance(ws, list) and any(a >= b for a, b in zip(ws, ws[1:])):
                raise ValueError(f"{key} must be strictly increasing")
        for key in ("cap", "exponent_cap", "value_cap", "product_cap", "max_tuples"):
            v = self.params.get(key)
            if v is not None and int(v) <= 0:
                raise ValueError(f"{key} must be positive")

    @classmethod
    def load(cls, path: str) -> ExperimentConfig:
        with open(path) as fh:
            d = json.load(fh)
        return cls(d["command"], d.get("params", {}), d.get("format", "json"), d.get("seed", 0))

    def to_argv(self) -> list[str]:
        argv = list(self.command)
        positional = self.params.get("input")
        if positional is not None:
            argv.append(str(positional))
        for key, value in self.params.items():
            if key == "input":
                continue
            flag = "--" + key.replace("_", "-")
            if value is True:
                argv.append(flag)
            elif value is False or value is None:
                continue
            elif isinstance(value, list):
                argv.append(f"{flag}=" + ",".join(str(v) for v in value))
            elif isinstance(value, (dict,)):
                argv.append(f"{flag}=" + json.dumps(value))
            else:
                argv.append(f"{flag}={value}")
        argv += ["--format", self.format, "--seed", str(self.seed)]
        return argv


# ---------------------------------------------------------------------------
# argument helpers


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise InvalidParameter(f"expected an integer, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise InvalidParameter(f"expected comma-separated integers, got {text!r}")


def _window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in str(text).split(":"))
    except ValueError:
        raise InvalidParameter(f"expected LO:HI, got {text!r}")
    if lo > hi:
        raise InvalidParameter("window must have LO <= HI")
    return lo, hi


def _json_arg(text: str):
    try:
        if text.startswith("@"):
            with open(text[1:]) as fh:
                return json.load(fh)
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidParameter(f"cannot read JSON argument: {exc}")


def _fraction_list(values: Sequence[str]) -> list[Fraction]:
    out = []
    for v in values:
        for part in str(v).split(","):
            if part:
                out.append(Fraction(part))
    return out


def _frac(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


# options whose values may start with "-" and would otherwise look like flags
_NEGATIVE_OK = {"--window", "--x", "--k", "--c", "--h"}


def _join_negative_values(argv: Sequence[str]) -> list[str]:
    out: list[str] = []
    skip = False
    for i in range(len(argv)):
        if skip:
            skip = False
            continue
        tok = argv[i]
        if tok in _NEGATIVE_OK and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and argv[i + 1][1:2].isdigit():
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_qe(a) -> dict:
    f = parse_formula(a.formula)
    out = qe.cooper_eliminate(f)
    fv = sorted(free_vars(f))
    report = {"input": format_formula(f), "output": format_formula(out), "free_vars": fv,
              "size": qe.qf_size(out)}
    if a.verify:
        # decide the input separately at each grid point and compare
        pred = compile_formula(out, fv)
        lo, hi = a.window
        bad, checked = [], 0
        for point in itertools.product(range(lo, hi + 1), repeat=len(fv)):
            g = f
            for v, val in zip(fv, point):
                g = substitute(g, v, Term.constant(val))
            checked += 1
            if qe.decide_sentence(g) != pred(point):
                bad.append(list(point))
        report["verify"] = {"ok": not bad, "checked": checked, "mismatches": bad[:10]}
    return report


def cmd_decide(a):
    f = parse_formula(a.formula)
    value = qe.decide_sentence(f)
    if not a.verify:
        return value
    report = {"sentence": format_formula(f), "value": value}
    if a.verify:
        neg = qe.decide_sentence(Not(f))
        report["verify"] = {"ok": neg != value, "checked": 1, "mismatches": []}
    return report


def _formula_density(a) -> tuple:
    f = parse_formula(a.formula)
    return f, semilinear.semilinearize_1d(f)


def cmd_density_exact(a) -> dict:
    f, s = _formula_density(a)
    report = {"density": _frac(semilinear.exact_density(s)), "period": s.period,
              "formula": format_formula(f), "set": s.describe()}
    if a.verify:
        g = f if is_quantifier_free(f) else qe.cooper_eliminate(f)
        name = (sorted(free_vars(g)) or ["x"])[0]
        pred = compile_formula(g, [name])
        H = 2 * (s.threshold + s.period) + 10
        bad = [x for x in range(-H, H + 1) if pred((x,)) != (x in s)]
        brute = sum(1 for x in range(-H, H + 1) if pred((x,)))
        ok = not bad and brute == s.count_window(H)
        report["verify"] = {"ok": ok, "checked": 2 * H + 1, "mismatches": bad[:10]}
    return report


def _density_rows(est) -> list[dict]:
    return est.rows()


def cmd_density_empirical(a) -> dict:
    f, s = _formula_density(a)
    est = sparseness.empirical_density(sparseness.Membership.semilinear(s), a.windows)
    report = {"formula": format_formula(f), "exact": _frac(semilinear.exact_density(s)),
              "rows": _density_rows(est)}
    if a.verify:
        g = f if is_quantifier_free(f) else qe.cooper_eliminate(f)
        name = (sorted(free_vars(g)) or ["x"])[0]
        pred = compile_formula(g, [name])
        h = a.windows[0]
        brute = sum(1 for x in range(-h, h + 1) if pred((x,)))
        report["verify"] = {"ok": brute == est.counts[0], "checked": 2 * h + 1, "mismatches": []}
    return report


def cmd_height(a) -> dict:
    x = heights.RationalTuple.parse(a.tuple)
    hv = heights.height_rational(x)
    report = {
        "tuple": [_frac(q) for q in x.as_fractions()],
        "numerators": list(x.numerators), "denominator": x.denominator,
        "H": hv.H, "logH": hv.logH,
    }
    if a.classify:
        if a.x is None or a.c is None or a.k is None:
            raise UsageError("--classify needs --x, --c and --k")
        report["class"] = heights.classify_s1_s2(a.x, a.c, _fraction_list(a.k))
    if a.verify:
        hp = heights.height_by_places(x)
        report["verify"] = {"ok": hp.H == hv.H, "checked": 1, "mismatches": []}
    return report


def _instance(a) -> powers.PowerSumInstance:
    return powers.PowerSumInstance(tuple(_fraction_list(a.k)),
                                   powers.PowerBasis(tuple(_ints(",".join(a.a))), a.exponent_cap))


def cmd_powers_solve(a):
    inst = _instance(a)
    sols = powers.solve_power_sum(inst, a.h)
    if not (a.detail or a.verify):
        return sols.values
    report = {
        "values": sols.values,
        "solutions": [{"c": c, "exponents": list(e)} for c, e in sols.solutions],
        "caps": list(sols.caps), "possibly_incomplete": sols.possibly_incomplete,
    }
    if a.verify:
        cap = max(sols.caps) if sols.caps else 0
        naive = powers.naive_power_sum(inst, a.h, cap)
        diff = sorted(set(naive) ^ set(sols.values))
        report["verify"] = {"ok": not diff, "checked": len(naive), "mismatches": diff[:10]}
    return report


def cmd_powers_bound(a) -> dict:
    inst = _instance(a)
    report = {"n": inst.n, "b": inst.b, "h": a.h, "bound": powers.count_bound(inst, a.h)}
    if a.s2 or a.verify:
        s2 = powers.s2_solutions(inst, a.h)
        report["s2_count"] = len(s2)
        if a.verify:
            report["verify"] = {"ok": len(s2) <= report["bound"], "checked": len(s2),
                                "mismatches": []}
    return report


def cmd_powers_image(a) -> dict:
    basis = powers.PowerBasis(tuple(_ints(",".join(a.a))), a.exponent_cap)
    f = PWLinearFn.parse(a.f)
    est = powers.image_density_experiment(basis, f, a.windows, value_cap=a.value_cap)
    report = {"bases": list(basis.bases), "f": str(f), "rows": est.rows(),
              "possibly_incomplete": est.possibly_incomplete,
              "upper": _frac(est.upper), "lower": _frac(est.lower)}
    if a.verify:
        h = a.windows[0]
        elems = basis.elements_upto(max(4 * h, 16))
        image = set()
        for tup in itertools.product(elems, repeat=f.arity):
            v = f(*tup)
            if v is not None and -h <= v <= h:
                image.add(v)
        ok = len(image) == est.counts[0] or (est.possibly_incomplete and len(image) >= est.counts[0])
        report["verify"] = {"ok": ok, "checked": len(image), "mismatches": []}
    return report


def _cell_arg(d) -> C.WeakCell:
    return C.WeakCell.from_description(d)


def cmd_cells_diamond(a) -> dict:
    A, B = _cell_arg(a.a), _cell_arg(a.b)
    m = a.m if a.m is not None else a.a.get("m", len(A.variables))
    cell = C.diamond_cells(A, B, m)
    report = {"cell": cell.describe(), "empty": cell.base == C.FALSE}
    if a.verify:
        grids = C.window_grids(a.window, len(cell.coords))
        x, y, rest = grids[:m], grids[m:2 * m], grids[2 * m:]
        want = A.mask(x + rest) & B.mask(y + rest)
        got = cell.mask(grids)
        bad = np.flatnonzero(want != got)
        report["verify"] = {"ok": bad.size == 0, "checked": int(want.size),
                            "mismatches": [[int(g[i]) for g in grids] for i in bad[:10]]}
    return report


def cmd_cells_decompose(a) -> dict:
    f = parse_formula(a.formula)
    vs = a.vars.split(",") if a.vars else None
    out = C.decompose_to_weak_cells(f, vs)
    vs = list(vs or sorted(free_vars(f)))
    report = {"variables": vs, "cells": [c.describe() for c in out]}
    if a.verify:
        g = f if is_quantifier_free(f) else qe.cooper_eliminate(f)
        grids = C.window_grids(a.window, len(vs))
        want = C.PresburgerSet(tuple(vs), g).mask(grids)
        cover = np.zeros(want.shape, dtype=int)
        for c in out:
            cover += c.mask(grids)
        bad = np.flatnonzero((cover > 1) | ((cover == 1) != want))
        report["verify"] = {"ok": bad.size == 0, "checked": int(want.size),
                            "mismatches": [[int(g[i]) for g in grids] for i in bad[:10]]}
    return report


def _points(s) -> list[list[int]]:
    return [list(p) for p in sorted(s)]


def _t_range(e: C.FamilyExpr, grids, window) -> tuple[int, int]:
    """A range of t certain to contain a witness whenever one exists."""
    k = e.kernel
    cells = [k] if isinstance(k, C.WeakCell) else list(getattr(k, "cells", ()))
    if not cells:
        w = window[1] - window[0] + 1
        return window[0] - 10 * w, window[1] + 10 * w
    vals, N = [0], 1
    for cell in cells:
        N = max(N, cell.N)
        for _, us in e.family:
            for u in us:
                args = [np.int64(c) for c in u] + list(grids)
                for fn in (cell.lower, cell.upper):
                    if fn is not None:
                        v, ok = fn.numpy_eval(args)
                        v, ok = np.broadcast_to(v, np.shape(ok)), np.asarray(ok)
                        if ok.any():
                            vals += [int(v[ok].min()), int(v[ok].max())]
    return min(vals) - N, max(vals) + N


def cmd_cells_project(a) -> dict:
    e = C.FamilyExpr.from_description(a.expr)
    p = C.project_s(e)
    n = p.n
    pts = C.eval_family_expr(p, a.window)
    report = {"expr": p.describe(), "window": list(a.window), "points": _points(pts)}
    if a.verify:
        grids = C.window_grids(a.window, n)
        lo, hi = _t_range(e, grids, a.window)
        hit = np.zeros(grids[0].shape if grids else (), dtype=bool)
        for t in range(lo, hi + 1):
            tt = np.full(hit.shape, t, dtype=np.int64)
            hit |= C.eval_family_mask(e, grids + [tt])
        brute = {tuple(int(g[i]) for g in grids) for i in np.flatnonzero(hit)} if grids else (
            {()} if hit.item() else set())
        diff = sorted(set(pts) ^ brute)
        report["verify"] = {"ok": not diff, "checked": int(hit.size),
                            "mismatches": [list(d) for d in diff[:10]]}
    return report


def cmd_cells_union(a) -> dict:
    cells = [_cell_arg(d) for d in a.cells]
    fam = C.FiberFamily(a.m, tuple((i, [tuple(p) for p in pts]) for i, pts in enumerate(a.family)))
    tu = C.technical_union_decompose(cells, fam)
    rhs = tu.evaluate(a.window)
    lhs = C.eval_family_expr(C.FamilyExpr(a.m, C.CellUnion(tuple(cells)), fam), a.window)
    report = {"groups": [g.describe() for g in tu.parts], "lhs_count": len(lhs),
              "rhs_count": len(rhs), "equal": lhs == rhs}
    if a.verify:
        n1 = len(cells[0].coords) - a.m
        brute = set()
        for p in itertools.product(range(a.window[0], a.window[1] + 1), repeat=n1):
            if any(all(any(c.contains(u + p) for c in cells) for u in us) for _, us in fam):
                brute.add(p)
        diff = sorted(brute ^ set(rhs))
        report["verify"] = {"ok": not diff, "checked": (a.window[1] - a.window[0] + 1) ** n1,
                            "mismatches": [list(d) for d in diff[:10]]}
    return report


def cmd_cells_cover(a) -> dict:
    f = PWLinearFn.parse(a.f, a.vars.split(",") if a.vars else None)
    h = C.build_covering_h(f, a.ell, a.N, a.e)
    report = {"h": h.describe(), "M": h.arity}
    if a.verify:
        bad = []
        lo, hi = a.window
        for x in itertools.product(range(lo, hi + 1), repeat=f.arity):
            fx = f(*x)
            for j, e in enumerate(a.e):
                want = 0 if fx is None else fx + j
                if h(*x, e) != want:
                    bad.append(list(x) + [e])
        report["verify"] = {"ok": not bad, "checked": (hi - lo + 1) ** f.arity * len(a.e),
                            "mismatches": bad[:10]}
    return report


def cmd_sparse_density(a) -> dict:
    member = sparseness.parse_set_spec(a.set)
    est = sparseness.empirical_density(member, a.h)
    report = {"set": a.set, "rows": est.rows()}
    if a.verify:
        h = a.h[0]
        if a.set.strip().lower() == "squarefree":
            brute = sum(1 for x in range(-h, h + 1) if sparseness.is_squarefree(x))
        else:
            brute = sum(1 for x in range(-h, h + 1) if x in member)
        report["verify"] = {"ok": brute == est.counts[0], "checked": 2 * h + 1, "mismatches": []}
    return report


def cmd_sparse_runs(a) -> dict:
    member = sparseness.parse_set_spec(a.set)
    h = a.h[-1]
    rep = sparseness.ap_run_analysis(member, h, a.Nmax)
    report = {"set": a.set, "h": h, "rows": rep.rows()}
    if a.verify:
        best = run = 0
        for x in range(-h, h + 1):
            run = run + 1 if x in member else 0
            best = max(best, run)
        report["verify"] = {"ok": best == rep.runs[(1, 0)].length, "checked": 2 * h + 1,
                            "mismatches": []}
    return report


def cmd_sparse_syndetic(a) -> dict:
    member = sparseness.parse_set_spec(a.set)
    h = a.h[-1]
    bs = range(a.bmax + 1) if a.bmax is not None else [a.b]
    rows = []
    for b in bs:
        r = sparseness.piecewise_syndetic_window(member, h, b)
        rows.append({"b": b, "length": r.length,
                     "interval": None if r.interval is None else list(r.interval),
                     "censored": r.censored})
    report = {"set": a.set, "h": h, "rows": rows}
    if a.verify:
        runs = sparseness.ap_run_analysis(member, h, 1).runs[(1, 0)].length
        zero = sparseness.piecewise_syndetic_window(member, h, 0).length
        report["verify"] = {"ok": runs == zero, "checked": 2 * h + 1, "mismatches": []}
    return report


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, window: str | None = None) -> None:
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--seed", type=_int, default=0)
    p.add_argument("--verify", action="store_true", help="diff against a brute-force oracle")
    p.add_argument("--output", help="write the report to this file (atomically)")
    if window is not None:
        p.add_argument("--window", type=_window, default=_window(window))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pa", description="Presburger arithmetic toolkit")
    parser.add_argument("--config", help="JSON experiment config; replaces the command line")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("qe", help="eliminate quantifiers")
    p.add_argument("formula")
    _common(p, "-3:3")
    p.set_defaults(func=cmd_qe)

    p = sub.add_parser("decide", help="decide a sentence")
    p.add_argument("formula")
    _common(p)
    p.set_defaults(func=cmd_decide)

    d = sub.add_parser("density", help="densities of definable subsets of Z")
    dsub = d.add_subparsers(dest="mode", metavar="MODE")
    p = dsub.add_parser("exact")
    p.add_argument("formula")
    _common(p)
    p.set_defaults(func=cmd_density_exact)
    p = dsub.add_parser("empirical")
    p.add_argument("formula")
    p.add_argument("--windows", type=_ints, default=[10**2, 10**3, 10**4, 10**5, 10**6])
    _common(p)
    p.set_defaults(func=cmd_density_empirical, tabular=True)

    p = sub.add_parser("height", help="height of a rational tuple")
    p.add_argument("tuple", help="e.g. 3/4,5/4")
    p.add_argument("--classify", action="store_true", help="S1/S2 test for --x, --c, --k")
    p.add_argument("--x", type=_ints)
    p.add_argument("--c", type=_int)
    p.add_argument("--k", nargs="+")
    _common(p)
    p.set_defaults(func=cmd_height)

    pw = sub.add_parser("powers", help="power-sum equations and images of power sets")
    psub = pw.add_subparsers(dest="mode", metavar="MODE")
    for name, func in (("solve", cmd_powers_solve), ("bound", cmd_powers_bound)):
        p = psub.add_parser(name)
        p.add_argument("--k", nargs="+", required=True, help="coefficients (rationals)")
        p.add_argument("--a", nargs="+", required=True, help="bases")
        p.add_argument("--h", type=_int, required=True)
        p.add_argument("--exponent-cap", type=_int, default=powers.DEFAULT_EXPONENT_CAP)
        if name == "solve":
            p.add_argument("--detail", action="store_true")
        else:
            p.add_argument("--s2", action="store_true", help="also count S2 solutions")
        _common(p)
        p.set_defaults(func=func)
    p = psub.add_parser("image-density")
    p.add_argument("--a", nargs="+", required=True)
    p.add_argument("--f", required=True, help='piecewise function, e.g. "x - y"')
    p.add_argument("--windows", type=_ints, default=[10**2, 10**3, 10**4, 10**5, 10**6])
    p.add_argument("--value-cap", type=_int, default=None)
    p.add_argument("--exponent-cap", type=_int, default=powers.DEFAULT_EXPONENT_CAP)
    _common(p)
    p.set_defaults(func=cmd_powers_image, tabular=True, default_format="csv")

    c = sub.add_parser("cells", help="weak cells and family expressions")
    csub = c.add_subparsers(dest="mode", metavar="MODE")
    p = csub.add_parser("diamond")
    p.add_argument("--a", type=_json_arg, required=True, help="cell JSON (or @file)")
    p.add_argument("--b", type=_json_arg, required=True)
    p.add_argument("--m", type=_int, default=None)
    _common(p, "-6:6")
    p.set_defaults(func=cmd_cells_diamond)
    p = csub.add_parser("decompose")
    p.add_argument("formula")
    p.add_argument("--vars", help="coordinate order; the last one is t")
    _common(p, "-10:10")
    p.set_defaults(func=cmd_cells_decompose)
    p = csub.add_parser("project")
    p.add_argument("--expr", type=_json_arg, required=True, help="expression JSON (or @file)")
    _common(p, "-20:20")
    p.set_defaults(func=cmd_cells_project)
    p = csub.add_parser("union-lemma")
    p.add_argument("--cells", type=_json_arg, required=True, help="JSON list of cells")
    p.add_argument("--family", type=_json_arg, required=True, help="JSON list of point lists")
    p.add_argument("--m", type=_int, default=1)
    _common(p, "-10:10")
    p.set_defaults(func=cmd_cells_union)
    p = csub.add_parser("cover-h")
    p.add_argument("--f", required=True)
    p.add_argument("--vars", default=None)
    p.add_argument("--ell", type=_int, required=True)
    p.add_argument("--N", type=_int, default=1)
    p.add_argument("--e", type=_ints, required=True, help="covering points from E")
    _common(p, "-5:5")
    p.set_defaults(func=cmd_cells_cover)

    s = sub.add_parser("sparse", help="finite-window sparseness evidence")
    ssub = s.add_subparsers(dest="mode", metavar="MODE")
    for name, func in (("density", cmd_sparse_density), ("ap-runs", cmd_sparse_runs),
                       ("syndetic", cmd_sparse_syndetic)):
        p = ssub.add_parser(name)
        p.add_argument("--set", required=True, help="powers:2,3 | squarefree | formula:<qf> | list:1,2")
        p.add_argument("--h", type=_ints, required=True, help="window(s)")
        if name == "ap-runs":
            p.add_argument("--Nmax", type=_int, default=4)
        if name == "syndetic":
            p.add_argument("--b", type=_int, default=1)
            p.add_argument("--bmax", type=_int, default=None)
        _common(p)
        p.set_defaults(func=func, tabular=True, default_format="csv")
    return parser


# ---------------------------------------------------------------------------
# output


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    text = resources.files("presburger").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def schema_name(a) -> str:
    parts = [a.command] + ([a.mode] if getattr(a, "mode", None) else [])
    return "_".join(parts).replace("-", "_")


def _csv(report) -> str:
    rows = report["rows"] if isinstance(report, dict) else [{"value": v} for v in report]
    buf = io.StringIO()
    if rows:
        fields = list(rows[0].keys())
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v)
                        for k, v in r.items()})
    return buf.getvalue()


def _write(text: str, path: str | None, stream) -> None:
    if path is None:
        stream.write(text)
        return
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".pa-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dispatch(argv: Sequence[str], stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    argv = list(argv)
    try:
        pre, rest = parser.parse_known_args(argv[:2]) if argv[:1] == ["--config"] else (None, None)
        if pre is not None and pre.config:
            argv = ExperimentConfig.load(pre.config).to_argv() + argv[2:]
    except (OSError, ValueError, KeyError) as exc:
        stderr.write(f"pa: bad config: {exc}\n")
        return 2
    argv = _join_negative_values(argv)
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            a = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    except InvalidParameter as exc:
        stderr.write(f"pa: error: {exc}\n")
        return 1
    if not getattr(a, "func", None):
        parser.print_usage(stderr)
        stderr.write("pa: missing or unknown subcommand\n")
        return 2
    fmt = a.format or getattr(a, "default_format", "json")
    if fmt == "csv" and not getattr(a, "tabular", False):
        stderr.write("pa: --format csv is only available for tabular reports\n")
        return 2
    try:
        report = a.func(a)
    except UsageError as exc:
        stderr.write(f"pa: {exc}\n")
        return 2
    except (ValueError, ArithmeticError, TypeError, KeyError, FormulaSyntaxError,
            UnboundVariableError, OSError) as exc:
        stderr.write(f"pa: error: {exc}\n")
        return 1
    jsonschema.validate(report, _schema(schema_name(a)))
    if fmt == "csv":
        text = _csv(report)
        if isinstance(report, dict) and "verify" in report:
            stderr.write("verify: " + json.dumps(report["verify"], sort_keys=True) + "\n")
    else:
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    _write(text, a.output, stdout)
    verify = report.get("verify") if isinstance(report, dict) else None
    if verify is not None and not verify["ok"]:
        stderr.write("pa: verification found mismatches\n")
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
