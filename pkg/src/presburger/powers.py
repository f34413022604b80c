"""Sets of powers ``E = a_1^N ∪ ... ∪ a_n^N`` and the power-sum equation

    k_1 a_1^e_1 + ... + k_n a_n^e_n = c.

The solver enumerates exponent tuples by meet-in-the-middle over the
positive and negative coefficient groups.  When every coefficient has the
same sign each exponent is bounded by the target window and the search is
exhaustive.  With mixed signs, terms can cancel at any size (``2^e - 2^e``),
so every exponent runs up to ``PowerBasis.exponent_cap`` and the result
carries ``possibly_incomplete=True``.
"""

from __future__ import annotations

import bisect
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import sympy

from .density import DensityEstimate
from .formula import compile_formula, compile_numpy
from .heights import classify_s1_s2
from .parallel import pmap
from .pwlinear import PWLinearFn

__all__ = [
    "PowerBasis", "PowerSumInstance", "PowerSumSolutions", "solve_power_sum",
    "naive_power_sum", "count_bound", "s2_solutions", "image_density_experiment",
    "NonTotalFunctionError",
]

DEFAULT_EXPONENT_CAP = 256


class NonTotalFunctionError(ValueError):
    """Raised when guards leave a gap or overlap; ``witness`` is the point."""

    def __init__(self, kind: str, witness: tuple[int, ...]):
        super().__init__(f"function guards {kind} at {witness}")
        self.kind = kind
        self.witness = witness


@dataclass(frozen=True)
class PowerBasis:
    bases: tuple[int, ...]
    exponent_cap: int = DEFAULT_EXPONENT_CAP

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(int(a) for a in self.bases))
        if not self.bases:
            raise ValueError("need at least one base")
        if any(a <= 1 for a in self.bases):
            raise ValueError("bases must be integers > 1")
        if self.exponent_cap < 0:
            raise ValueError("exponent cap must be nonnegative")

    def elements_upto(self, limit: int) -> list[int]:
        """Sorted distinct elements of ``E`` in ``[1, limit]``."""
        out: set[int] = set()
        for a in set(self.bases):
            v = 1
            while v <= limit:
                out.add(v)
                v *= a
        return sorted(out)

    def __contains__(self, x: int) -> bool:
        if x < 1:
            return False
        for a in set(self.bases):
            v = x
            while v % a == 0:
                v //= a
            if v == 1:
                return True
        return False

    def mask(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.size == 0:
            return np.zeros(values.shape, dtype=bool)
        hi = int(values.max())
        return np.isin(values, np.array(self.elements_upto(max(hi, 1)), dtype=values.dtype))


@dataclass(frozen=True)
class PowerSumInstance:
    coeffs: tuple[Fraction, ...]
    basis: PowerBasis

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(Fraction(k) for k in self.coeffs))
        if len(self.coeffs) != len(self.basis.bases):
            raise ValueError("need one coefficient per base")
        if any(k == 0 for k in self.coeffs):
            raise ValueError("coefficients must be nonzero")

    @property
    def n(self) -> int:
        return len(self.coeffs)

    @property
    def b(self) -> int:
        """Least positive integer making every ``b * k_i`` integral."""
        return reduce(lambda acc, k: acc * k.denominator // math.gcd(acc, k.denominator),
                      self.coeffs, 1)

    @property
    def m(self) -> int | Fraction:
        return max(abs(k) for k in self.coeffs)

    @property
    def scaled(self) -> tuple[int, ...]:
        b = self.b
        return tuple(int(k * b) for k in self.coeffs)

    def value(self, exps: Sequence[int]) -> Fraction:
        return sum((k * a ** e for k, a, e in zip(self.coeffs, self.basis.bases, exps)),
                   Fraction(0))


@dataclass(frozen=True)
class PowerSumSolutions:
    h: int
    solutions: tuple[tuple[int, tuple[int, ...]], ...]
    caps: tuple[int, ...]
    possibly_incomplete: bool

    @property
    def values(self) -> list[int]:
        return [c for c, _ in self.solutions]

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self) -> int:
        return len(self.solutions)


def _max_exponent(a: int, coeff: int, limit: int) -> int:
    """Largest ``e`` with ``coeff * a^e <= limit`` (``-1`` if none)."""
    if coeff > limit:
        return -1
    e, v = 0, coeff
    while v * a <= limit:
        v *= a
        e += 1
    return e


def exponent_caps(inst: PowerSumInstance, h: int) -> tuple[tuple[int, ...], bool]:
    """Per-term exponent bounds for ``|sum| <= h`` and whether they are exact.

    With a single sign, ``|K_i| a_i^e + sum_{j != i} |K_j| <= b h`` must hold
    for every solution (each other term is at least ``|K_j|``).  With mixed
    signs no such bound exists and the configured cap is used.
    """
    ks = inst.scaled
    bh = inst.b * h
    cap = inst.basis.exponent_cap
    if all(k > 0 for k in ks) or all(k < 0 for k in ks):
        total_min = sum(abs(k) for k in ks)
        caps = tuple(min(cap, _max_exponent(a, abs(k), bh - (total_min - abs(k))))
                     for a, k in zip(inst.basis.bases, ks))
        exact = all(_max_exponent(a, abs(k), bh - (total_min - abs(k))) <= cap
                    for a, k in zip(inst.basis.bases, ks))
        return caps, exact
    return tuple(cap for _ in ks), False


def _group_sums(ks: Sequence[int], bases: Sequence[int], idx: Sequence[int],
                caps: Sequence[int]) -> dict[int, list[tuple[int, ...]]]:
    """All partial sums over the indices ``idx``, keyed by value."""
    out: dict[int, list[tuple[int, ...]]] = defaultdict(list)
    ranges = [range(caps[i] + 1) for i in idx]
    powers = {i: [bases[i] ** e for e in range(caps[i] + 1)] for i in idx}
    for exps in itertools.product(*ranges):
        s = sum(ks[i] * powers[i][e] for i, e in zip(idx, exps))
        out[s].append(exps)
    return out


def _enumerate(inst: PowerSumInstance, lo: int, hi: int, caps: Sequence[int]):
    """Yield ``(scaled_sum, exps)`` for every exponent tuple within ``caps``
    whose scaled sum ``b * c`` lies in ``[lo, hi]``."""
    if any(c < 0 for c in caps):
        return
    ks, bases = inst.scaled, inst.basis.bases
    pos = [i for i, k in enumerate(ks) if k > 0]
    neg = [i for i, k in enumerate(ks) if k < 0]
    left = _group_sums(ks, bases, pos, caps) if pos else {0: [()]}
    right = _group_sums(ks, bases, neg, caps) if neg else {0: [()]}
    lkeys = sorted(left)
    for r in sorted(right):
        # need lo <= l + r <= hi
        i = bisect.bisect_left(lkeys, lo - r)
        j = bisect.bisect_right(lkeys, hi - r)
        for l in lkeys[i:j]:
            for le in left[l]:
                for re in right[r]:
                    exps = [0] * len(ks)
                    for idx, e in zip(pos, le):
                        exps[idx] = e
                    for idx, e in zip(neg, re):
                        exps[idx] = e
                    yield l + r, tuple(exps)


def solve_power_sum(inst: PowerSumInstance, h: int) -> PowerSumSolutions:
    """Every integer ``c`` in ``[-h, h]`` of the form ``sum k_i a_i^e_i``, each
    with its lexicographically least exponent tuple."""
    if h < 1:
        raise ValueError("h must be positive")
    caps, exact = exponent_caps(inst, h)
    b = inst.b
    best: dict[int, tuple[int, ...]] = {}
    for s, exps in _enumerate(inst, -b * h, b * h, caps):
        if s % b:
            continue
        c = s // b
        if c not in best or exps < best[c]:
            best[c] = exps
    return PowerSumSolutions(h, tuple(sorted(best.items())), caps, not exact)


def naive_power_sum(inst: PowerSumInstance, h: int, cap: int) -> dict[int, tuple[int, ...]]:
    """Reference oracle: nested loops over all exponents ``<= cap``."""
    out: dict[int, tuple[int, ...]] = {}
    for exps in itertools.product(range(cap + 1), repeat=inst.n):
        v = inst.value(exps)
        if v.denominator == 1 and abs(v) <= h:
            c = int(v)
            if c not in out or exps < out[c]:
                out[c] = exps
    return out


def count_bound(inst: PowerSumInstance, h: int) -> int:
    """``ceil((5 n^2 log2(b h))^n)``; requires ``h > max a_i``."""
    if h <= max(inst.basis.bases):
        raise ValueError(f"h must exceed max base {max(inst.basis.bases)}")
    n, bh = inst.n, inst.b * h
    if bh & (bh - 1) == 0:
        return (5 * n * n * (bh.bit_length() - 1)) ** n
    expr = (5 * n * n * sympy.log(bh, 2)) ** n
    return int(sympy.ceiling(expr))


def s2_solutions(inst: PowerSumInstance, h: int) -> list[tuple[int, tuple[int, ...]]]:
    """All ``(c, exps)`` with ``m < |c| <= h`` whose point ``x = (a_i^e_i)``
    falls in the S2 class.

    S2 forces ``max x_i < (b h)^(4 n^2)``, which bounds every exponent, so
    the enumeration is exhaustive regardless of coefficient signs.
    """
    n, b = inst.n, inst.b
    limit = (b * h) ** (4 * n * n) - 1
    caps = [_max_exponent(a, 1, limit) for a in inst.basis.bases]
    sign_caps, exact = exponent_caps(inst, h)
    if exact:
        caps = [min(c, s) for c, s in zip(caps, sign_caps)]
    out = []
    for s, exps in _enumerate(inst, -b * h, b * h, caps):
        if s % b:
            continue
        c = s // b
        if not inst.m < abs(c) <= h:
            continue
        x = tuple(a ** e for a, e in zip(inst.basis.bases, exps))
        if classify_s1_s2(x, c, inst.coeffs) == "S2":
            out.append((c, exps))
    out.sort()
    return out


# ---------------------------------------------------------------------------
# images of E^M under piecewise-affine maps

def _coordinate_bounds(piece, variables: Sequence[str], h: int, value_cap: int):
    """Per-coordinate upper bounds on ``E`` elements that can map into
    ``[-h, h]`` under one affine piece, and whether they are exact."""
    coeffs = [piece.body.coeff(v) for v in variables]
    d, c0 = piece.denominator, piece.body.const
    signs = {c > 0 for c in coeffs if c}
    if len(signs) > 1:
        return [value_cap] * len(variables), False
    # single sign: sum |c_j| x_j lies in an interval of width 2dh
    total_min = sum(abs(c) for c in coeffs)
    room = d * h + abs(c0)
    bounds, exact = [], True
    for c in coeffs:
        if c == 0:
            # coordinate does not move the value; only the guard can see it
            bounds.append(value_cap)
            exact = False
        else:
            bounds.append(max(0, (room - (total_min - abs(c))) // abs(c)))
    return bounds, exact


def _dtype_for(bound: int):
    return np.int64 if bound < 2 ** 62 else object


def _piece_values(f: PWLinearFn, index: int, elems: Sequence[np.ndarray], h: int) -> np.ndarray:
    """Distinct values in ``[-h, h]`` taken by piece ``index`` on the grid."""
    piece = f.pieces[index]
    if any(len(e) == 0 for e in elems):
        return np.array([], dtype=np.int64)
    grids = np.meshgrid(*elems, indexing="ij") if elems else []
    # reuse the whole function's evaluation so earlier pieces keep priority
    values, defined = f.numpy_eval(grids) if grids else f.numpy_eval([])
    mine = np.broadcast_to(compile_numpy(piece.guard, f.variables)(grids), np.shape(values))
    for q in f.pieces[:index]:
        mine = mine & ~np.broadcast_to(compile_numpy(q.guard, f.variables)(grids), np.shape(values))
    keep = mine & defined & (values >= -h) & (values <= h)
    return np.unique(np.asarray(values[keep]).astype(np.int64))


def validate_total(f: PWLinearFn, samples: Iterable[Sequence[int]]) -> None:
    """Raise :class:`NonTotalFunctionError` at the first sampled point where
    no guard or more than one guard holds."""
    guards = [compile_formula(p.guard, f.variables) for p in f.pieces]
    for pt in samples:
        hits = sum(1 for g in guards if g(tuple(pt)))
        if hits == 0:
            raise NonTotalFunctionError("leave a gap", tuple(pt))
        if hits > 1:
            raise NonTotalFunctionError("overlap", tuple(pt))


def image_density_experiment(basis: PowerBasis, f: PWLinearFn, windows: Sequence[int],
                             value_cap: int | None = None, max_tuples: int = 50_000_000,
                             workers: int | None = None) -> DensityEstimate:
    """Counts of ``f(E^M) ∩ [-h, h]`` for each window ``h``.

    Coordinates are drawn from ``E ∩ [1, B]``, with ``B`` derived per piece:
    exact when the piece's coefficients share a sign, otherwise
    ``value_cap`` (default ``max(windows)^2``) and the estimate is flagged
    ``possibly_incomplete``.
    """
    windows = sorted(int(h) for h in windows)
    if not windows:
        raise ValueError("need at least one window")
    if any(a >= b for a, b in zip(windows, windows[1:])):
        raise ValueError("windows must be strictly increasing")
    H = windows[-1]
    cap = value_cap if value_cap is not None else max(H * H, 16)
    m = f.arity
    small = basis.elements_upto(16)
    box = range(-3, 4)
    validate_total(f, itertools.chain(itertools.product(box, repeat=m),
                                      itertools.product(small, repeat=m)))

    incomplete = False
    tasks = []
    for i, piece in enumerate(f.pieces):
        bounds, exact = _coordinate_bounds(piece, f.variables, H, cap)
        incomplete |= not exact
        elems = [np.array(basis.elements_upto(b), dtype=_dtype_for(cap)) for b in bounds]
        size = math.prod(len(e) for e in elems)
        if size > max_tuples:
            raise MemoryError(f"piece {i} needs {size} tuples (limit {max_tuples})")
        if elems and len(elems[0]) > 1:
            # split on the leading coordinate so partitions can run concurrently
            for chunk in np.array_split(elems[0], min(len(elems[0]), 8)):
                tasks.append((i, [chunk] + elems[1:]))
        else:
            tasks.append((i, elems))

    parts = pmap(lambda t: _piece_values(f, t[0], t[1], H), tasks, workers)
    image = np.unique(np.concatenate(parts)) if parts else np.array([], dtype=np.int64)
    counts = [int(np.searchsorted(image, h, side="right") - np.searchsorted(image, -h, side="left"))
              for h in windows]
    return DensityEstimate(tuple(windows), tuple(counts), incomplete)
