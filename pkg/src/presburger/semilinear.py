"""Definable subsets of the integers as eventually periodic sets.

A :class:`SemilinearSet1` stores a period ``P``, residue sets for the two
tails and a finite list of exceptions.  Every integer first gets the
*default* verdict, ``x mod P in R+`` for ``x >= 0`` and ``x mod P in R-``
for ``x < 0``; integers listed as insertions or deletions override it.
Exceptions lie inside ``[-T, T]``.

Constructors return a canonical form: the period is the least one
compatible with both tails and ``T`` is the largest exceptional magnitude
(0 when there are none).  Two sets are equal iff their canonical forms are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Iterable

import numpy as np

from . import qe
from .formula import (
    TRUE, Cong, Eq, Formula, LessEq, Not, Term, compile_formula, conj,
    disj, free_vars, is_quantifier_free, parse_formula,
)

__all__ = [
    "ExactDensity", "SemilinearSet1", "semilinearize_1d", "exact_density",
    "union", "intersection", "complement", "difference", "translate", "scale",
    "natural_numbers", "empty_set", "full_set", "progression",
]

#: Densities are exact rationals; Fraction is always reduced with positive denominator.
ExactDensity = Fraction


class ArityError(ValueError):
    pass


@dataclass(frozen=True)
class SemilinearSet1:
    period: int
    pos_residues: frozenset[int]
    neg_residues: frozenset[int]
    threshold: int = 0
    insertions: frozenset[int] = field(default_factory=frozenset)
    deletions: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("period must be positive")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        for name in ("pos_residues", "neg_residues", "insertions", "deletions"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if any(not 0 <= r < self.period for r in self.pos_residues | self.neg_residues):
            raise ValueError("residues must lie in [0, period)")
        if any(abs(x) > self.threshold for x in self.insertions | self.deletions):
            raise ValueError("exceptions must lie inside [-T, T]")
        for x in self.insertions:
            if self._default(x):
                raise ValueError(f"insertion {x} is already a default member")
        for x in self.deletions:
            if not self._default(x):
                raise ValueError(f"deletion {x} is not a default member")

    def _default(self, x: int) -> bool:
        tail = self.pos_residues if x >= 0 else self.neg_residues
        return x % self.period in tail

    def __contains__(self, x: int) -> bool:
        if x in self.insertions:
            return True
        if x in self.deletions:
            return False
        return self._default(x)

    def contains(self, x: int) -> bool:
        return x in self

    def mask(self, values: np.ndarray) -> np.ndarray:
        """Vectorised membership for an integer array."""
        values = np.asarray(values)
        res = values % self.period
        pos = np.zeros(self.period, dtype=bool)
        neg = np.zeros(self.period, dtype=bool)
        pos[list(self.pos_residues)] = True
        neg[list(self.neg_residues)] = True
        out = np.where(values >= 0, pos[res], neg[res])
        if self.insertions:
            out |= np.isin(values, sorted(self.insertions))
        if self.deletions:
            out &= ~np.isin(values, sorted(self.deletions))
        return out

    def count_window(self, h: int) -> int:
        """``|A ∩ [-h, h]|`` in O(P + T) time, exact for any ``h``."""
        if h < 0:
            return 0
        total = 0
        for r in self.pos_residues:
            # nonnegative x <= h with x = r mod P
            if r <= h:
                total += (h - r) // self.period + 1
        for r in self.neg_residues:
            # negative x >= -h with x = r mod P, i.e. -x = (P - r) mod P
            s = (-r) % self.period or self.period
            if s <= h:
                total += (h - s) // self.period + 1
        total += sum(1 for x in self.insertions if abs(x) <= h)
        total -= sum(1 for x in self.deletions if abs(x) <= h)
        return total

    def to_formula(self, var: str = "x") -> Formula:
        x = Term.var(var)
        zero = Term()

        def residues(rs: Iterable[int]) -> Formula:
            rs = sorted(rs)
            if len(rs) == self.period:
                return TRUE
            return disj(Cong(x, r, self.period) for r in rs)

        base = disj([
            conj([LessEq(zero, x), residues(self.pos_residues)]),
            conj([Not(LessEq(zero, x)), residues(self.neg_residues)]),
        ])
        kept = conj([base, *(Not(Eq(x, Term.constant(d))) for d in sorted(self.deletions))])
        return disj([kept, *(Eq(x, Term.constant(i)) for i in sorted(self.insertions))])

    def describe(self) -> dict:
        return {
            "period": self.period,
            "pos_residues": sorted(self.pos_residues),
            "neg_residues": sorted(self.neg_residues),
            "threshold": self.threshold,
            "insertions": sorted(self.insertions),
            "deletions": sorted(self.deletions),
        }


def _divisors(n: int) -> list[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def _reduce_period(period: int, residues: frozenset[int]) -> int:
    """Least divisor ``d`` of ``period`` such that ``residues`` is a union of
    classes modulo ``d``."""
    for d in _divisors(period):
        if all((r in residues) == ((r % d) in residues) for r in range(period)):
            return d
    return period


def _from_membership(period: int, member: Callable[[int], bool], horizon: int) -> SemilinearSet1:
    """Canonical set agreeing with ``member``, which must be ``period``-periodic
    on each of ``x > horizon`` and ``x < -horizon``."""
    start = horizon + 1
    pos = frozenset(r for r in range(period)
                    if member(start + (r - start) % period))
    neg = frozenset(r for r in range(period)
                    if member(-start - ((-start - r) % period)))
    p_pos = _reduce_period(period, pos)
    p_neg = _reduce_period(period, neg)
    p = p_pos * p_neg // math.gcd(p_pos, p_neg)
    pos = frozenset(r % p for r in pos)
    neg = frozenset(r % p for r in neg)
    ins, dele = [], []
    for x in range(-horizon, horizon + 1):
        default = (x % p) in (pos if x >= 0 else neg)
        actual = bool(member(x))
        if actual and not default:
            ins.append(x)
        elif default and not actual:
            dele.append(x)
    t = max((abs(x) for x in ins + dele), default=0)
    return SemilinearSet1(p, pos, neg, t, frozenset(ins), frozenset(dele))


def _formula_profile(f: Formula) -> tuple[int, int]:
    """(lcm of moduli, max |constant|) over the normalised literals of ``f``."""
    node = qe.to_nnf(f)
    period, horizon = 1, 0
    for lit in qe._literals(node):
        if lit.kind in ("dvd", "ndvd"):
            period = period * lit.modulus // math.gcd(period, lit.modulus)
        else:
            horizon = max(horizon, abs(lit.term.const))
    return period, horizon


def semilinearize_1d(f: Formula | str, var: str | None = None) -> SemilinearSet1:
    """Canonical eventually periodic form of a formula in one free variable.

    Quantified input is eliminated first.  Beyond ``max |constant| + P``
    only the congruence literals can change truth value, which gives the
    scan horizon.
    """
    if isinstance(f, str):
        f = parse_formula(f)
    if not is_quantifier_free(f):
        f = qe.cooper_eliminate(f)
    fv = sorted(free_vars(f))
    if len(fv) > 1:
        raise ArityError(f"expected one free variable, found {', '.join(fv)}")
    name = fv[0] if fv else (var or "x")
    period, horizon = _formula_profile(f)
    pred = compile_formula(f, [name])
    return _from_membership(period, lambda x: pred((x,)), horizon + period)


def exact_density(s: SemilinearSet1) -> Fraction:
    """Natural density ``(|R+| + |R-|) / (2P)``; exceptions do not contribute."""
    return Fraction(len(s.pos_residues) + len(s.neg_residues), 2 * s.period)


def _lcm(*ns: int) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), ns, 1)


def union(a: SemilinearSet1, b: SemilinearSet1) -> SemilinearSet1:
    return _from_membership(_lcm(a.period, b.period), lambda x: x in a or x in b,
                            max(a.threshold, b.threshold))


def intersection(a: SemilinearSet1, b: SemilinearSet1) -> SemilinearSet1:
    return _from_membership(_lcm(a.period, b.period), lambda x: x in a and x in b,
                            max(a.threshold, b.threshold))


def complement(a: SemilinearSet1) -> SemilinearSet1:
    return _from_membership(a.period, lambda x: x not in a, a.threshold)


def difference(a: SemilinearSet1, b: SemilinearSet1) -> SemilinearSet1:
    return intersection(a, complement(b))


def translate(a: SemilinearSet1, k: int) -> SemilinearSet1:
    """``A + k``."""
    return _from_membership(a.period, lambda x: (x - k) in a, a.threshold + abs(k))


def scale(a: SemilinearSet1, k: int) -> SemilinearSet1:
    """``kA = {k*x : x in A}``.  For ``k < 0`` this is ``-(|k|A)``; the
    density of either is ``d(A)/|k|``."""
    if k == 0:
        nonempty = bool(a.insertions or a.pos_residues or a.neg_residues)
        return _from_membership(1, lambda x: x == 0 and nonempty, 1)
    m = abs(k)

    def member(x: int) -> bool:
        return x % m == 0 and (x // k) in a

    return _from_membership(m * a.period, member, m * (a.threshold + 1))


def natural_numbers() -> SemilinearSet1:
    return SemilinearSet1(1, frozenset({0}), frozenset())


def empty_set() -> SemilinearSet1:
    return SemilinearSet1(1, frozenset(), frozenset())


def full_set() -> SemilinearSet1:
    return SemilinearSet1(1, frozenset({0}), frozenset({0}))


def progression(modulus: int, residue: int) -> SemilinearSet1:
    """All integers congruent to ``residue`` modulo ``modulus``."""
    r = residue % modulus
    return SemilinearSet1(modulus, frozenset({r}), frozenset({r}))
