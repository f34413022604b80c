"""Weak cells and union-of-intersection expressions over fibers.

A weak cell lives in ``Z^(D-1) x Z`` and is cut out by a base formula on the
first ``D - 1`` coordinates, optional piecewise-affine bounds on the last
coordinate ``t`` and a congruence ``t = k mod N``.  Coordinates are named;
a missing lower (upper) bound stands for ``-inf`` (``+inf``).  A bound
function is only meaningful where one of its guards holds, so a point
outside a bound's domain is outside the cell.

A :class:`FamilyExpr` pairs a kernel ``X`` over ``Z^(m+n)`` with a finite
family ``(P_a)`` of point sets in ``Z^m`` and denotes

    union over a of (intersection over u in P_a of X_u),

where ``X_u = {x : (u, x) in X}``.  The intersection over an empty ``P_a``
is the whole space.  Index families are always finite and explicit.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import qe
from .formula import (
    FALSE, TRUE, Cong, Eq, Exists, Formula, LessEq, Not, Term, compile_numpy, conj, disj,
    format_formula, free_vars, fresh_names, is_quantifier_free, parse_formula, rename,
    substitute,
)
from .pwlinear import Piece, PWLinearFn, floor_div, pw_max, pw_min
from .semilinear import _reduce_period

__all__ = [
    "WeakCell", "CellUnion", "PresburgerSet", "FiberFamily", "FamilyExpr", "TechnicalUnion",
    "CellArityError", "FamilyTooLargeError", "empty_cell", "crt", "diamond_cells",
    "technical_union_decompose", "decompose_to_weak_cells", "eval_family_expr",
    "eval_family_mask", "family_boolean", "project_s", "psi_formula", "build_covering_h",
    "window_grids", "DEFAULT_PRODUCT_CAP",
]

DEFAULT_PRODUCT_CAP = 10**6


class CellArityError(ValueError):
    pass


class FamilyTooLargeError(ValueError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"choice-function product has {size} elements, above the cap {cap}")
        self.size = size
        self.cap = cap


@functools.lru_cache(maxsize=8192)
def _pred(f: Formula, variables: tuple[str, ...]):
    return compile_numpy(f, variables)


def _shape(arrays: Sequence) -> tuple[int, ...]:
    return np.broadcast_shapes(*(np.shape(a) for a in arrays)) if arrays else ()


def _formula_mask(f: Formula, variables: tuple[str, ...], arrays: Sequence) -> np.ndarray:
    shape = _shape(arrays)
    if f == TRUE:
        return np.ones(shape, dtype=bool)
    if f == FALSE:
        return np.zeros(shape, dtype=bool)
    return np.array(np.broadcast_to(_pred(f, variables)(arrays), shape), dtype=bool)


def _bound_text(fn: PWLinearFn | None) -> dict | None:
    return None if fn is None else fn.describe()


def _bound_from(d, variables: Sequence[str]) -> PWLinearFn | None:
    if d is None:
        return None
    if isinstance(d, str):
        return PWLinearFn.parse(d, variables)
    if isinstance(d, (int,)):
        return PWLinearFn.constant(variables, d)
    fn = PWLinearFn.from_description({"variables": d.get("variables", list(variables)),
                                      "pieces": d["pieces"]})
    return fn.with_variables(variables)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class WeakCell:
    variables: tuple[str, ...]
    t: str = "t"
    base: Formula = TRUE
    lower: PWLinearFn | None = None
    upper: PWLinearFn | None = None
    k: int = 0
    N: int = 1

    def __post_init__(self):
        vs = tuple(self.variables)
        object.__setattr__(self, "variables", vs)
        if len(set(vs)) != len(vs) or self.t in vs:
            raise CellArityError("cell coordinates must be distinct")
        if self.N < 1:
            raise ValueError("modulus must be positive")
        object.__setattr__(self, "k", self.k % self.N)
        extra = free_vars(self.base) - set(vs)
        if extra:
            raise CellArityError(f"base mentions unknown coordinates {sorted(extra)}")
        for name in ("lower", "upper"):
            fn = getattr(self, name)
            if fn is None:
                continue
            if self.t in fn.variables:
                raise CellArityError("bound functions may not depend on the last coordinate")
            object.__setattr__(self, name, fn.with_variables(vs))

    @property
    def coords(self) -> tuple[str, ...]:
        return self.variables + (self.t,)

    @property
    def cell_type(self) -> str:
        return {(False, False): "i", (True, False): "ii", (False, True): "iii",
                (True, True): "iv"}[(self.lower is not None, self.upper is not None)]

    def to_formula(self) -> Formula:
        t = Term.var(self.t)
        parts = [self.base]
        if self.lower is not None:
            parts.append(self.lower.compare("le", t))
        if self.upper is not None:
            parts.append(self.upper.compare("ge", t))
        if self.N > 1:
            parts.append(Cong(t, self.k, self.N))
        return conj(parts)

    def mask(self, arrays: Sequence) -> np.ndarray:
        """Vectorised membership; ``arrays`` follow :attr:`coords`."""
        arrays = [np.asarray(a) for a in arrays]
        xs, t = arrays[:-1], arrays[-1]
        out = _formula_mask(self.base, self.variables, xs)
        out = np.broadcast_to(out, _shape(arrays)).copy()
        if self.lower is not None:
            vals, ok = self.lower.numpy_eval(xs)
            out &= ok & (vals <= t)
        if self.upper is not None:
            vals, ok = self.upper.numpy_eval(xs)
            out &= ok & (t <= vals)
        if self.N > 1:
            out &= (t - self.k) % self.N == 0
        return out

    def contains(self, point: Sequence[int]) -> bool:
        if len(point) != len(self.coords):
            raise CellArityError(f"expected {len(self.coords)} coordinates")
        env = dict(zip(self.coords, point))
        if not _holds(self.base, self.variables, env):
            return False
        t = env[self.t]
        if self.lower is not None:
            lo = self.lower.evaluate(env)
            if lo is None or t < lo:
                return False
        if self.upper is not None:
            hi = self.upper.evaluate(env)
            if hi is None or t > hi:
                return False
        return (t - self.k) % self.N == 0

    def rename(self, mapping: Mapping[str, str]) -> WeakCell:
        return WeakCell(
            tuple(mapping.get(v, v) for v in self.variables), mapping.get(self.t, self.t),
            rename(self.base, mapping),
            None if self.lower is None else self.lower.rename(mapping),
            None if self.upper is None else self.upper.rename(mapping),
            self.k, self.N,
        )

    def describe(self) -> dict:
        return {
            "variables": list(self.variables), "t": self.t, "base": format_formula(self.base),
            "lower": _bound_text(self.lower), "upper": _bound_text(self.upper),
            "k": self.k, "N": self.N, "type": self.cell_type,
        }

    @classmethod
    def from_description(cls, d: Mapping) -> WeakCell:
        vs = tuple(d["variables"])
        return cls(vs, d.get("t", "t"), parse_formula(d.get("base", "0 = 0")),
                   _bound_from(d.get("lower"), vs), _bound_from(d.get("upper"), vs),
                   int(d.get("k", 0)), int(d.get("N", 1)))

    def __str__(self) -> str:
        lo = "-inf" if self.lower is None else str(self.lower)
        hi = "+inf" if self.upper is None else str(self.upper)
        return (f"{{({', '.join(self.coords)}) : {format_formula(self.base)}, "
                f"{lo} <= {self.t} <= {hi}, {self.t} = {self.k} mod {self.N}}}")


def _holds(f: Formula, variables: tuple[str, ...], env: Mapping[str, int]) -> bool:
    if f == TRUE:
        return True
    return bool(_pred(f, variables)([env[v] for v in variables]))


def empty_cell(variables: Sequence[str], t: str = "t") -> WeakCell:
    """The canonical empty cell: base false, ``N = 1``, ``k = 0``."""
    return WeakCell(tuple(variables), t, FALSE, None, None, 0, 1)


@dataclass(frozen=True)
class CellUnion:
    cells: tuple[WeakCell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if not self.cells:
            raise ValueError("a cell union needs at least one cell")
        if any(c.coords != self.cells[0].coords for c in self.cells):
            raise CellArityError("cells in a union must share coordinates")

    @property
    def coords(self) -> tuple[str, ...]:
        return self.cells[0].coords

    def to_formula(self) -> Formula:
        return disj(c.to_formula() for c in self.cells)

    def mask(self, arrays: Sequence) -> np.ndarray:
        out = self.cells[0].mask(arrays)
        for c in self.cells[1:]:
            out = out | c.mask(arrays)
        return out

    def contains(self, point: Sequence[int]) -> bool:
        return any(c.contains(point) for c in self.cells)

    def describe(self) -> dict:
        return {"cells": [c.describe() for c in self.cells]}


@dataclass(frozen=True)
class PresburgerSet:
    variables: tuple[str, ...]
    formula: Formula

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not is_quantifier_free(self.formula):
            object.__setattr__(self, "formula", qe.cooper_eliminate(self.formula))
        extra = free_vars(self.formula) - set(self.variables)
        if extra:
            raise CellArityError(f"formula mentions unknown coordinates {sorted(extra)}")

    @property
    def coords(self) -> tuple[str, ...]:
        return self.variables

    def to_formula(self) -> Formula:
        return self.formula

    def mask(self, arrays: Sequence) -> np.ndarray:
        return _formula_mask(self.formula, self.variables, [np.asarray(a) for a in arrays])

    def contains(self, point: Sequence[int]) -> bool:
        return _holds(self.formula, self.variables, dict(zip(self.variables, point)))

    def describe(self) -> dict:
        return {"variables": list(self.variables), "formula": format_formula(self.formula)}


Kernel = Union[PresburgerSet, WeakCell, CellUnion]


def _as_presburger(k: Kernel) -> PresburgerSet:
    return k if isinstance(k, PresburgerSet) else PresburgerSet(k.coords, k.to_formula())


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class FiberFamily:
    """Finite indexed family ``(P_a)``; each ``P_a`` is a set of ``m``-tuples,
    stored sorted and deduplicated."""

    m: int
    members: tuple[tuple[object, tuple[tuple[int, ...], ...]], ...] = ()

    def __post_init__(self):
        norm = []
        seen = set()
        for label, pts in self.members:
            if label in seen:
                raise ValueError(f"duplicate family label {label!r}")
            seen.add(label)
            tup = tuple(sorted({tuple(int(c) for c in p) for p in pts}))
            if any(len(p) != self.m for p in tup):
                raise CellArityError(f"family points must have {self.m} coordinates")
            norm.append((label, tup))
        object.__setattr__(self, "members", tuple(norm))

    @classmethod
    def of(cls, m: int, sets: Iterable[Iterable]) -> FiberFamily:
        """Family labelled ``0, 1, ...``; scalars are accepted when ``m == 1``."""
        out = []
        for i, pts in enumerate(sets):
            out.append((i, [p if isinstance(p, (tuple, list)) else (p,) for p in pts]))
        return cls(m, tuple(out))

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.members)

    def points(self) -> list[tuple[int, ...]]:
        return sorted({p for _, pts in self.members for p in pts})

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def describe(self) -> list[dict]:
        return [{"label": _label_json(label), "points": [list(p) for p in pts]}
                for label, pts in self.members]


def _label_json(label):
    if isinstance(label, (str, int)) or label is None:
        return label
    if isinstance(label, tuple):
        return [_label_json(x) for x in label]
    return str(label)


def _label_key(label):
    return tuple(_label_key(x) for x in label) if isinstance(label, list) else label


@dataclass(frozen=True)
class FamilyExpr:
    m: int
    kernel: Kernel
    family: FiberFamily

    def __post_init__(self):
        if self.family.m != self.m:
            raise CellArityError("family arity does not match m")
        if self.m > len(self.kernel.coords):
            raise CellArityError("kernel has fewer coordinates than m")

    @property
    def fiber_coords(self) -> tuple[str, ...]:
        return self.kernel.coords[self.m:]

    @property
    def n(self) -> int:
        return len(self.fiber_coords)

    def describe(self) -> dict:
        k = self.kernel
        if isinstance(k, WeakCell):
            kd = {"cell": k.describe()}
        elif isinstance(k, CellUnion):
            kd = {"cells": [c.describe() for c in k.cells]}
        else:
            kd = {"formula": format_formula(k.formula), "variables": list(k.variables)}
        return {"m": self.m, "kernel": kd, "family": self.family.describe()}

    @classmethod
    def from_description(cls, d: Mapping) -> FamilyExpr:
        kd = d["kernel"]
        if "cell" in kd:
            kernel: Kernel = WeakCell.from_description(kd["cell"])
        elif "cells" in kd:
            kernel = CellUnion(tuple(WeakCell.from_description(c) for c in kd["cells"]))
        else:
            kernel = PresburgerSet(tuple(kd["variables"]), parse_formula(kd["formula"]))
        m = int(d["m"])
        fam = FiberFamily(m, tuple((_label_key(e.get("label", i)), [tuple(p) for p in e["points"]])
                                   for i, e in enumerate(d["family"])))
        return cls(m, kernel, fam)


def window_grids(window, n: int) -> list[np.ndarray]:
    """Flattened coordinate arrays of every point of a box.

    ``window`` is one ``(lo, hi)`` pair used for every coordinate or a
    sequence of ``n`` pairs; both ends are included.
    """
    if len(window) == 2 and all(isinstance(v, (int, np.integer)) for v in window):
        window = [tuple(window)] * n
    if len(window) != n:
        raise CellArityError(f"window has {len(window)} sides, expected {n}")
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in window]
    if n == 0:
        return []
    mesh = np.meshgrid(*axes, indexing="ij")
    return [g.ravel() for g in mesh]


def eval_family_mask(e: FamilyExpr, grids: Sequence[np.ndarray]) -> np.ndarray:
    """Membership of the given points (one array per fiber coordinate)."""
    grids = [np.asarray(g) for g in grids]
    shape = _shape(grids)
    cache: dict[tuple[int, ...], np.ndarray] = {}
    out = np.zeros(shape, dtype=bool)
    for _, pts in e.family:
        acc = np.ones(shape, dtype=bool)
        for u in pts:
            if u not in cache:
                args = [np.int64(c) for c in u] + list(grids)
                cache[u] = np.broadcast_to(e.kernel.mask(args), shape)
            acc &= cache[u]
            if not acc.any():
                break
        out |= acc
    return out


def eval_family_expr(e: FamilyExpr, window) -> frozenset[tuple[int, ...]]:
    """The points of the window lying in the set denoted by ``e``."""
    grids = window_grids(window, e.n)
    if e.n == 0:
        return frozenset({()}) if eval_family_mask(e, []).item() else frozenset()
    m = eval_family_mask(e, grids)
    pts = np.stack(grids, axis=1)[m]
    return frozenset(tuple(int(c) for c in p) for p in pts)


# ---------------------------------------------------------------------------
# diamond product


def crt(k1: int, n1: int, k2: int, n2: int) -> tuple[int, int] | None:
    """``(k, N)`` with ``t = k mod N`` iff ``t = k1 mod n1`` and ``t = k2 mod n2``,
    or ``None`` when the two congruences are incompatible."""
    g = math.gcd(n1, n2)
    if (k2 - k1) % g:
        return None
    lcm = n1 // g * n2
    m2 = n2 // g
    s = ((k2 - k1) // g * pow(n1 // g, -1, m2)) % m2 if m2 > 1 else 0
    return (k1 + n1 * s) % lcm, lcm


def _glue_names(a_coords: Sequence[str], b_own: Sequence[str]) -> list[str]:
    return fresh_names(list(b_own), set(a_coords))


def diamond_cells(a: WeakCell, b: WeakCell, m: int) -> WeakCell:
    """``A ⋄ B`` for cells over ``Z^m x Z^(n+1)``, glued along the last
    ``n + 1`` coordinates.

    The result has coordinates ``(u_A, u_B, z, t)``: the shared ones keep
    A's names and B's own coordinates are renamed if they clash.
    """
    if len(a.variables) != len(b.variables):
        raise CellArityError("cells must have the same number of coordinates")
    if not 0 <= m <= len(a.variables):
        raise CellArityError("m must not exceed the base arity")
    ua, za = a.variables[:m], a.variables[m:]
    ub, zb = b.variables[:m], b.variables[m:]
    new_ub = _glue_names(a.coords, ub)
    mapping = {**dict(zip(ub, new_ub)), **dict(zip(zb, za)), b.t: a.t}
    b2 = b.rename(mapping)
    variables = tuple(ua) + tuple(new_ub) + tuple(za)
    cong = crt(a.k, a.N, b.k, b.N)
    base = conj([a.base, b2.base])
    if cong is None or base == FALSE:
        return empty_cell(variables, a.t)

    def merge(f, g, op):
        if f is None:
            return None if g is None else g.with_variables(variables)
        if g is None:
            return f.with_variables(variables)
        return op(f.with_variables(variables), g.with_variables(variables))

    lower = merge(a.lower, b2.lower, pw_max)
    upper = merge(a.upper, b2.upper, pw_min)
    return WeakCell(variables, a.t, base, lower, upper, cong[0], cong[1])


def _diamond_kernels(x: Kernel, mx: int, y: Kernel, my: int) -> tuple[Kernel, int]:
    """``X ⋄ Y`` with coordinates ``(u_X, u_Y, shared)``."""
    if isinstance(x, WeakCell) and isinstance(y, WeakCell) and mx == my:
        return diamond_cells(x, y, mx), 2 * mx
    xp, yp = _as_presburger(x), _as_presburger(y)
    ux, sx = xp.variables[:mx], xp.variables[mx:]
    uy, sy = yp.variables[:my], yp.variables[my:]
    if len(sx) != len(sy):
        raise CellArityError("expressions live in spaces of different dimension")
    new_uy = _glue_names(xp.variables, uy)
    mapping = {**dict(zip(uy, new_uy)), **dict(zip(sy, sx))}
    variables = tuple(ux) + tuple(new_uy) + tuple(sx)
    return PresburgerSet(variables, conj([xp.formula, rename(yp.formula, mapping)])), mx + my


# ---------------------------------------------------------------------------
# technical union identity


@dataclass(frozen=True)
class TechnicalUnion:
    head: FamilyExpr   # C_1 ∪ ... ∪ C_k, original family
    last: FamilyExpr   # C_(k+1), original family
    mixed: FamilyExpr  # ∪_i C_i ⋄ C_(k+1) over ordered two-part partitions

    @property
    def parts(self) -> tuple[FamilyExpr, FamilyExpr, FamilyExpr]:
        return self.head, self.last, self.mixed

    def evaluate(self, window) -> frozenset:
        out: frozenset = frozenset()
        for e in self.parts:
            out |= eval_family_expr(e, window)
        return out


def technical_union_decompose(cells: Sequence[WeakCell], family: FiberFamily) -> TechnicalUnion:
    """Rewrite ``∪_a ∩_{u in P_a} (C_1 ∪ ... ∪ C_(k+1))_u`` as three
    expressions whose union is the same set.

    In the third group each ``P_a`` is split into a nonempty part ``P1``
    carrying ``C_1 .. C_k`` and a nonempty part ``P2`` carrying
    ``C_(k+1)``; the index is ``(a, P1)`` and the points are ``v + w`` for
    ``(v, w)`` in ``P1 x P2``.
    """
    cells = list(cells)
    if len(cells) < 2:
        raise ValueError("need at least two cells")
    m = family.m
    last = cells[-1]
    head = FamilyExpr(m, CellUnion(tuple(cells[:-1])), family)
    tail = FamilyExpr(m, last, family)
    diamonds = CellUnion(tuple(diamond_cells(c, last, m) for c in cells[:-1]))
    members = []
    for label, pts in family:
        for bits in range(1, 2 ** len(pts) - 1):
            first = tuple(p for i, p in enumerate(pts) if bits >> i & 1)
            second = tuple(p for i, p in enumerate(pts) if not bits >> i & 1)
            members.append(((label, first), tuple(v + w for v in first for w in second)))
    mixed = FamilyExpr(2 * m, diamonds, FiberFamily(2 * m, tuple(members)))
    return TechnicalUnion(head, tail, mixed)


# ---------------------------------------------------------------------------
# decomposition of a Presburger set into weak cells


def _bound_of(lit: qe.Lit, y: str) -> tuple[str, Term, int]:
    """``c*y + s > 0`` as ``("lo" | "up", num, den)`` with bound ``floor(num/den)``."""
    c = lit.term.coeff(y)
    s = lit.term.without(y)
    if c > 0:
        return "lo", -s + c, c
    return "up", s - 1, -c


def _add_bound(lowers: tuple, uppers: tuple, bound) -> tuple[tuple, tuple] | None:
    side, num, den = bound
    mine, other = (list(lowers), uppers) if side == "lo" else (list(uppers), lowers)
    for i, (n2, d2) in enumerate(mine):
        if d2 != den:
            continue
        diff = num - n2
        if diff.is_constant:
            tighter = diff.const > 0 if side == "lo" else diff.const < 0
            if tighter:
                mine[i] = (num, den)
                break
            return lowers, uppers
    else:
        mine.append((num, den))
    for n2, d2 in other:
        if d2 != den:
            continue
        gap = (n2 - num) if side == "lo" else (num - n2)
        # upper - lower numerators; the floors are certainly out of order past -den
        if gap.is_constant and gap.const <= -den:
            return None
    return (tuple(mine), uppers) if side == "lo" else (lowers, tuple(mine))


def _first_y_literal(node, y: str):
    for lit in qe._literals(node):
        if lit.kind == "lt" and lit.term.coeff(y):
            return lit
    return None


def _split_on_bounds(node, y: str, lowers: tuple, uppers: tuple):
    if node is False:
        return
    lit = _first_y_literal(node, y)
    if lit is None:
        yield node, lowers, uppers
        return
    neg = qe.negate_lit(lit)
    for value, chosen in ((True, lit), (False, neg)):
        def fix(l, value=value):
            if l == lit:
                return value
            if l == neg:
                return not value
            return l
        sub = qe._map_lits(node, fix)
        if sub is False:
            continue
        nxt = _add_bound(lowers, uppers, _bound_of(chosen, y))
        if nxt is None:
            continue
        yield from _split_on_bounds(sub, y, *nxt)


def _expand_equalities(node, y: str):
    def fn(lit: qe.Lit):
        if lit.term.coeff(y) == 0 or lit.kind not in ("eq", "ne"):
            return lit
        t = lit.term
        if lit.kind == "eq":
            return qe.mk_and([qe.mk_lit("lt", t + 1), qe.mk_lit("lt", -t + 1)])
        return qe.mk_or([qe.mk_lit("lt", t), qe.mk_lit("lt", -t)])
    return qe._map_lits(node, fn)


def _fold(fns: list[PWLinearFn], op) -> PWLinearFn | None:
    if not fns:
        return None
    out = fns[0]
    for f in fns[1:]:
        out = op(out, f)
    return out


def decompose_to_weak_cells(x: Formula | str, variables: Sequence[str] | None = None) -> list[WeakCell]:
    """Partition the set defined by ``x`` into weak cells.

    The last entry of ``variables`` (default: sorted free variables) plays
    the role of ``t``.  Congruences mentioning ``t`` are resolved by
    splitting on ``t`` modulo their combined period; then every order atom
    in ``t`` is decided true or false along a binary tree, each leaf giving
    one cell whose bounds are the max (min) of the collected lower (upper)
    bounds.  Leaves differing only in the residue of ``t`` are merged back
    into the coarsest congruence class that describes them.
    """
    if isinstance(x, str):
        x = parse_formula(x)
    if not is_quantifier_free(x):
        x = qe.cooper_eliminate(x)
    if variables is None:
        variables = sorted(free_vars(x))
    variables = tuple(variables)
    if not variables:
        raise CellArityError("need at least one coordinate")
    extra = free_vars(x) - set(variables)
    if extra:
        raise CellArityError(f"formula mentions unknown coordinates {sorted(extra)}")
    xs, y = variables[:-1], variables[-1]
    node = _expand_equalities(qe.to_nnf(x), y)

    period = 1
    for lit in qe._literals(node):
        c = lit.term.coeff(y)
        if lit.kind in ("dvd", "ndvd") and c:
            step = lit.modulus // math.gcd(c, lit.modulus)
            period = period * step // math.gcd(period, step)

    groups: dict[tuple, set[int]] = {}
    for r in range(period):
        def fix(lit: qe.Lit, r=r):
            c = lit.term.coeff(y)
            if lit.kind in ("dvd", "ndvd") and c:
                return qe.mk_lit(lit.kind, lit.term.without(y) + c * r, lit.modulus)
            return lit
        node_r = qe._map_lits(node, fix)
        for base, lowers, uppers in _split_on_bounds(node_r, y, (), ()):
            lo = _fold([floor_div(xs, n, d) for n, d in lowers], pw_max)
            hi = _fold([floor_div(xs, n, d) for n, d in uppers], pw_min)
            key = (qe.to_formula(base), lo, hi)
            groups.setdefault(key, set()).add(r)

    cells = []
    for (base, lo, hi), residues in groups.items():
        d = _reduce_period(period, frozenset(residues))
        for k in sorted({r % d for r in residues}):
            cells.append(WeakCell(xs, y, base, lo, hi, k, d))
    return cells


# ---------------------------------------------------------------------------
# Boolean operations


def _complement_kernel(k: Kernel) -> PresburgerSet:
    p = _as_presburger(k)
    return PresburgerSet(p.variables, qe.simplify(Not(p.formula)))


def family_boolean(op: str, e1: FamilyExpr, e2: FamilyExpr | None = None,
                   product_cap: int = DEFAULT_PRODUCT_CAP) -> FamilyExpr:
    """``"complement"`` of ``e1`` or ``"intersect"`` of ``e1`` and ``e2``.

    The complement distributes ``∩_a ∪_{u in P_a}`` into a union over
    choice functions ``γ`` in ``∏ P_a`` of ``∩_a (Z \\ X)_{γ(a)}``.

    For the intersection the kernel is ``X ⋄ Y`` and the index set is
    ``I x J``.  An empty ``P_a`` would make ``P_a x Q_b`` empty and lose the
    ``Q_b`` constraint, so when any member is empty a flag coordinate is
    appended: real tuples carry flag 0, an empty member is replaced by the
    single tuple with flag 1, and the kernel is relaxed to hold everywhere
    on flag 1.
    """
    if op == "complement":
        size = 1
        for _, pts in e1.family:
            size *= len(pts)
        if size > product_cap:
            raise FamilyTooLargeError(size, product_cap)
        kernel = _complement_kernel(e1.kernel)
        members = []
        labels = e1.family.labels
        for choice in itertools.product(*(pts for _, pts in e1.family)):
            members.append((tuple(zip(labels, choice)), tuple(choice)))
        return FamilyExpr(e1.m, kernel, FiberFamily(e1.m, tuple(members)))
    if op == "intersect":
        if e2 is None:
            raise ValueError("intersect needs two expressions")
        a, b = _flag_empty(e1), _flag_empty(e2)
        kernel, m = _diamond_kernels(a.kernel, a.m, b.kernel, b.m)
        members = []
        for (la, pa), (lb, pb) in itertools.product(a.family, b.family):
            members.append(((la, lb), tuple(u + v for u in pa for v in pb)))
        return FamilyExpr(m, kernel, FiberFamily(m, tuple(members)))
    raise ValueError(f"unknown operation {op!r}")


def _flag_empty(e: FamilyExpr) -> FamilyExpr:
    if all(pts for _, pts in e.family):
        return e
    p = _as_presburger(e.kernel)
    flag = fresh_names(["flag"], p.variables)[0]
    u, rest = p.variables[:e.m], p.variables[e.m:]
    fl = Term.var(flag)
    formula = disj([conj([Eq(fl, Term()), p.formula]), Not(Eq(fl, Term()))])
    members = []
    for label, pts in e.family:
        if pts:
            members.append((label, tuple(q + (0,) for q in pts)))
        else:
            members.append((label, ((0,) * e.m + (1,),)))
    m = e.m + 1
    return FamilyExpr(m, PresburgerSet(tuple(u) + (flag,) + tuple(rest), formula),
                      FiberFamily(m, tuple(members)))


# ---------------------------------------------------------------------------
# projection


def _pw_le(f: PWLinearFn, g: PWLinearFn) -> Formula:
    """``f <= g`` where both are defined (each may use its own coordinate names)."""
    return disj(conj([p.guard, q.guard, p.scaled_le(q)]) for p in f.pieces for q in g.pieces)


def psi_formula(a: Piece, b: Piece, k: int, N: int) -> Formula:
    """Some ``y = k mod N`` lies in ``[a, b]``, with ``a``, ``b`` the exact
    values of the pieces (guards not included).

    The least such ``y`` above ``a`` is ``a + ((k - a) mod N)``, so the
    predicate splits on ``a mod N``.
    """
    parts = []
    da, db = a.denominator, b.denominator
    for j in range(N):
        c = (k - j) % N
        order = LessEq(a.body * db + c * da * db, b.body * da)
        if N == 1:
            parts.append(order)
        else:
            parts.append(conj([Cong(a.body, j * da, N * da), order]))
    return disj(parts)


def _pw_psi(f: PWLinearFn, g: PWLinearFn, k: int, N: int) -> Formula:
    return disj(conj([p.guard, q.guard, psi_formula(p, q, k, N)])
                for p in f.pieces for q in g.pieces)


def _fiber_intersection_empty(cell: WeakCell, m: int, pts: Sequence[tuple[int, ...]]) -> bool:
    """Is ``∩_{u in pts} C_u`` empty?  Decided by quantifier elimination."""
    body = cell.to_formula()
    parts = []
    for u in pts:
        f = body
        for name, val in zip(cell.variables[:m], u):
            f = substitute(f, name, Term.constant(val))
        parts.append(f)
    sentence = conj(parts)
    for v in reversed(cell.coords[m:]):
        if v in free_vars(sentence):
            sentence = Exists(v, sentence)
    return not qe.decide_sentence(sentence)


def project_s(e: FamilyExpr, prune_empty: bool = True) -> FamilyExpr:
    """Project an expression with a weak-cell kernel along its last coordinate.

    The result is a union-of-intersections expression over a Presburger
    kernel.  Types (ii) and (iii) index by ``(a, v)`` with ``v`` the point
    of ``P_a`` where the bound is extremal; type (iv) indexes by
    ``(a, v, w)`` and adds the congruence-window predicate from
    :func:`psi_formula`.  The cell's base is kept in every case.  An empty
    ``P_a`` (whose fiber intersection is everything) becomes an index with
    an empty point set.  With ``prune_empty`` indices whose fiber
    intersection is empty are dropped first.
    """
    cell = e.kernel
    if not isinstance(cell, WeakCell):
        raise TypeError("projection needs a weak-cell kernel")
    m = e.m
    u = cell.variables[:m]
    xs = cell.variables[m:]
    members = [(label, pts) for label, pts in e.family
               if not (prune_empty and pts and _fiber_intersection_empty(cell, m, pts))]
    kind = cell.cell_type
    if kind == "i":
        return FamilyExpr(m, PresburgerSet(cell.variables, cell.base), FiberFamily(m, tuple(members)))

    taken = set(cell.coords)
    v = fresh_names([f"{n}_v" for n in u], taken)
    taken |= set(v)
    to_v = dict(zip(u, v))
    if kind in ("ii", "iii"):
        if kind == "ii":
            cmp = _pw_le(cell.lower, cell.lower.rename(to_v))
        else:
            cmp = _pw_le(cell.upper.rename(to_v), cell.upper)
        kernel = PresburgerSet(tuple(u) + tuple(v) + tuple(xs), conj([cell.base, cmp]))
        fam = []
        for label, pts in members:
            if not pts:
                fam.append(((label, None), ()))
            for vv in pts:
                fam.append(((label, vv), tuple(p + vv for p in pts)))
        return FamilyExpr(2 * m, kernel, FiberFamily(2 * m, tuple(fam)))

    w = fresh_names([f"{n}_w" for n in u], taken)
    to_w = dict(zip(u, w))
    f_v = cell.lower.rename(to_v)
    g_w = cell.upper.rename(to_w)
    formula = conj([
        cell.base,
        _pw_le(cell.lower, f_v),
        _pw_le(g_w, cell.upper),
        _pw_psi(f_v, g_w, cell.k, cell.N),
    ])
    kernel = PresburgerSet(tuple(u) + tuple(v) + tuple(w) + tuple(xs), formula)
    fam = []
    for label, pts in members:
        if not pts:
            fam.append(((label, None, None), ()))
        for vv in pts:
            for ww in pts:
                fam.append(((label, vv, ww), tuple(p + vv + ww for p in pts)))
    return FamilyExpr(3 * m, kernel, FiberFamily(3 * m, tuple(fam)))


# ---------------------------------------------------------------------------
# covering function


def build_covering_h(f: PWLinearFn, ell: int, N: int, e_pts: Sequence[int],
                     var: str | None = None) -> PWLinearFn:
    """``h(x, e_j) = f(x) + j`` for the listed points ``e_0 .. e_(ell*N-1)``
    and ``h = 0`` elsewhere (including where ``f`` is undefined)."""
    if ell < 1 or N < 1:
        raise ValueError("ell and N must be positive")
    e_pts = [int(e) for e in e_pts]
    if len(set(e_pts)) != len(e_pts):
        raise ValueError("covering points must be distinct")
    if len(e_pts) != ell * N:
        raise ValueError(f"need exactly ell*N = {ell * N} covering points")
    var = var or fresh_names(["e"], f.variables)[0]
    if var in f.variables:
        raise CellArityError(f"{var} is already a coordinate of f")
    E = Term.var(var)
    outside = qe.simplify(Not(f.domain()))
    pieces = []
    for j, e in enumerate(e_pts):
        hit = Eq(E, Term.constant(e))
        for p in f.pieces:
            pieces.append(Piece(conj([hit, p.guard]), p.body + j * p.denominator, p.denominator))
        if outside != FALSE:
            pieces.append(Piece(conj([hit, outside]), Term()))
    pieces.append(Piece(conj(Not(Eq(E, Term.constant(e))) for e in e_pts), Term()))
    return PWLinearFn(tuple(f.variables) + (var,), tuple(pieces))
