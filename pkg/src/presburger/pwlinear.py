"""Piecewise-affine integer functions given by guarded pieces.

A piece is ``guard -> body / denominator``: on points where the guard holds
the body is divisible by the denominator and the quotient is the value.
Rational slopes arise from floors and ceilings of affine forms and are
made exact by congruence guards (``floor(t/a)`` splits by ``t mod a``).

Guards are meant to be pairwise disjoint; evaluation takes the first piece
whose guard holds and returns ``None`` outside every guard.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .formula import (
    FALSE, TRUE, Cong, Eq, Exists, Formula, LessEq, Not, Term, compile_formula, compile_numpy,
    conj, disj, format_formula, free_vars, parse_formula, parse_term, rename, substitute,
)

__all__ = ["Piece", "PWLinearFn", "floor_div", "ceil_div", "pw_max", "pw_min"]


@dataclass(frozen=True)
class Piece:
    guard: Formula
    body: Term
    denominator: int = 1

    def __post_init__(self):
        if self.denominator < 1:
            raise ValueError("piece denominator must be positive")

    def scaled_le(self, other: Piece) -> Formula:
        """``self <= other`` as a linear atom (both values exact)."""
        return LessEq(self.body * other.denominator, other.body * self.denominator)

    def difference(self, other: Piece) -> Term:
        """``den_o * body_s - den_s * body_o``; its sign is the sign of ``self - other``."""
        return self.body * other.denominator - other.body * self.denominator

    def shift(self, k: int) -> Piece:
        return Piece(self.guard, self.body + k * self.denominator, self.denominator)

    def __str__(self) -> str:
        body = str(self.body) if self.denominator == 1 else f"({self.body}) / {self.denominator}"
        return f"[{format_formula(self.guard)}] {body}"


@dataclass(frozen=True)
class PWLinearFn:
    variables: tuple[str, ...]
    pieces: tuple[Piece, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "pieces", tuple(self.pieces))
        allowed = set(self.variables)
        for p in self.pieces:
            extra = (free_vars(p.guard) | p.body.vars) - allowed
            if extra:
                raise ValueError(f"piece mentions undeclared variables {sorted(extra)}")

    # construction ---------------------------------------------------------

    @classmethod
    def affine(cls, variables: Sequence[str], body: Term | str, denominator: int = 1) -> PWLinearFn:
        if isinstance(body, str):
            body = parse_term(body)
        if denominator == 1:
            return cls(tuple(variables), (Piece(TRUE, body, 1),))
        return floor_div(tuple(variables), body, denominator)

    @classmethod
    def constant(cls, variables: Sequence[str], value: int) -> PWLinearFn:
        return cls(tuple(variables), (Piece(TRUE, Term.constant(value)),))

    @classmethod
    def parse(cls, text: str, variables: Sequence[str] | None = None) -> PWLinearFn:
        """``"x - y"`` or ``"x < y: y - x; x >= y: x - y"``.

        Without an explicit variable list the sorted free variables are used.
        """
        pieces = []
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" in chunk:
                g, b = chunk.rsplit(":", 1)
                pieces.append(Piece(parse_formula(g), parse_term(b)))
            else:
                pieces.append(Piece(TRUE, parse_term(chunk)))
        if not pieces:
            raise ValueError("empty piecewise function")
        if variables is None:
            names: set[str] = set()
            for p in pieces:
                names |= free_vars(p.guard) | p.body.vars
            variables = sorted(names)
        return cls(tuple(variables), tuple(pieces))

    # evaluation -----------------------------------------------------------

    @property
    def arity(self) -> int:
        return len(self.variables)

    def evaluate(self, assignment: Mapping[str, int]) -> int | None:
        for p in self.pieces:
            if _holds(p.guard, self.variables, assignment):
                return p.body.evaluate(assignment) // p.denominator
        return None

    def __call__(self, *args: int) -> int | None:
        if len(args) != self.arity:
            raise TypeError(f"expected {self.arity} arguments")
        return self.evaluate(dict(zip(self.variables, args)))

    def numpy_eval(self, arrays: Sequence, variables: Sequence[str] | None = None):
        """Vectorised evaluation: returns ``(values, defined)`` arrays.

        ``arrays`` are positional for ``variables`` (default: own variables).
        """
        variables = tuple(variables or self.variables)
        shape = np.broadcast_shapes(*(np.shape(a) for a in arrays)) if arrays else ()
        dtype = np.result_type(*arrays) if arrays else np.int64
        dtype = dtype if dtype != bool else np.int64
        size = int(np.prod(shape))
        flat = [np.broadcast_to(np.asarray(a), shape).reshape(size) for a in arrays]
        values = np.zeros(size, dtype=dtype)
        defined = np.zeros(size, dtype=bool)
        index = {v: i for i, v in enumerate(variables)}
        todo = np.arange(size)
        # each guard is only evaluated on the points no earlier piece claimed
        for p in self.pieces:
            if todo.size == 0:
                break
            sub = [a[todo] for a in flat]
            g = np.broadcast_to(_compiled_np(p.guard, variables)(sub), todo.shape)
            if not g.any():
                continue
            body = p.body.const
            for v, c in p.body.coeffs:
                body = body + c * sub[index[v]][g]
            take = todo[g]
            values[take] = np.asarray(body) // p.denominator
            defined[take] = True
            todo = todo[~g]
        return values.reshape(shape), defined.reshape(shape)

    def domain(self) -> Formula:
        return disj(p.guard for p in self.pieces)

    # formula views --------------------------------------------------------

    def compare(self, op: str, t: Term) -> Formula:
        """``f <= t`` (``op="le"``), ``f >= t`` (``"ge"``) or ``f = t`` (``"eq"``).

        False outside the domain.
        """
        parts = []
        for p in self.pieces:
            scaled = t * p.denominator
            if op == "le":
                atom = LessEq(p.body, scaled)
            elif op == "ge":
                atom = LessEq(scaled, p.body)
            elif op == "eq":
                atom = Eq(p.body, scaled)
            else:
                raise ValueError(op)
            parts.append(conj([p.guard, atom]))
        return disj(parts)

    def rename(self, mapping: Mapping[str, str]) -> PWLinearFn:
        return PWLinearFn(
            tuple(mapping.get(v, v) for v in self.variables),
            tuple(Piece(rename(p.guard, mapping), p.body.rename(mapping), p.denominator)
                  for p in self.pieces),
        )

    def with_variables(self, variables: Sequence[str]) -> PWLinearFn:
        """Same function viewed over a superset of variables."""
        return PWLinearFn(tuple(variables), self.pieces)

    def shift(self, k: int) -> PWLinearFn:
        return PWLinearFn(self.variables, tuple(p.shift(k) for p in self.pieces))

    def restrict(self, guard: Formula) -> PWLinearFn:
        return PWLinearFn(self.variables, tuple(
            Piece(conj([guard, p.guard]), p.body, p.denominator) for p in self.pieces))

    def check_partition(self, domain: Formula = TRUE) -> tuple[str, dict] | None:
        """Decide (symbolically) whether the guards partition ``domain``.

        Returns ``None`` when they do, else ``("gap" | "overlap", witness)``.
        """
        vs = list(self.variables)
        gap = conj([domain, Not(self.domain())])
        w = _witness(gap, vs)
        if w is not None:
            return "gap", w
        for a, b in itertools.combinations(self.pieces, 2):
            w = _witness(conj([domain, a.guard, b.guard]), vs)
            if w is not None:
                return "overlap", w
        return None

    def describe(self) -> dict:
        return {
            "variables": list(self.variables),
            "pieces": [
                {"guard": format_formula(p.guard), "body": str(p.body), "denominator": p.denominator}
                for p in self.pieces
            ],
        }

    @classmethod
    def from_description(cls, d: Mapping) -> PWLinearFn:
        return cls(tuple(d["variables"]), tuple(
            Piece(parse_formula(p.get("guard", "0 = 0")), parse_term(str(p["body"])),
                  int(p.get("denominator", 1)))
            for p in d["pieces"]))

    def __str__(self) -> str:
        if len(self.pieces) == 1 and self.pieces[0].guard == TRUE and self.pieces[0].denominator == 1:
            return str(self.pieces[0].body)
        return "; ".join(str(p) for p in self.pieces)


@functools.lru_cache(maxsize=4096)
def _compiled(f: Formula, variables: tuple[str, ...]):
    return compile_formula(f, variables)


@functools.lru_cache(maxsize=4096)
def _compiled_np(f: Formula, variables: tuple[str, ...]):
    return compile_numpy(f, variables)


def _holds(f: Formula, variables: Sequence[str], assignment: Mapping[str, int]) -> bool:
    if f == TRUE:
        return True
    return bool(_compiled(f, tuple(variables))(tuple(assignment[v] for v in variables)))


def _witness(f: Formula, variables: Sequence[str]) -> dict | None:
    """A satisfying assignment of a QF formula, or None if unsatisfiable.

    Satisfiability is decided by quantifier elimination; a witness is then
    extracted coordinate by coordinate, searching outward from 0.
    """
    from . import qe

    if not qe.decide_sentence(_close(f, variables)):
        return None
    fixed: dict[str, int] = {}
    rest = list(variables)
    while rest:
        v = rest.pop(0)
        for cand in _outward():
            g = f
            for name, val in {**fixed, v: cand}.items():
                g = substitute(g, name, Term.constant(val))
            if qe.decide_sentence(_close(g, rest)):
                fixed[v] = cand
                break
    return fixed


def _close(f: Formula, variables: Sequence[str]) -> Formula:
    for v in reversed(list(variables)):
        if v in free_vars(f):
            f = Exists(v, f)
    return f


def _outward():
    yield 0
    k = 1
    while True:
        yield k
        yield -k
        k += 1


def floor_div(variables: Sequence[str], t: Term, a: int) -> PWLinearFn:
    """``floor(t / a)`` for ``a >= 1`` as pieces split on ``t mod a``."""
    if a < 1:
        raise ValueError("divisor must be positive")
    if a == 1:
        return PWLinearFn(tuple(variables), (Piece(TRUE, t),))
    pieces = []
    for j in range(a):
        guard = Cong(t, j, a)
        if t.is_constant:
            if t.const % a != j:
                continue
            guard = TRUE
        elif j % math.gcd(t.content(), a) != t.const % math.gcd(t.content(), a):
            continue  # residue class unreachable
        pieces.append(Piece(guard, t - j, a))
    return PWLinearFn(tuple(variables), tuple(pieces))


def ceil_div(variables: Sequence[str], t: Term, a: int) -> PWLinearFn:
    """``ceil(t / a) = floor((t + a - 1) / a)``."""
    return floor_div(variables, t + (a - 1), a)


def _combine(f: PWLinearFn, g: PWLinearFn, take_max: bool) -> PWLinearFn:
    if f.variables != g.variables:
        vs = tuple(dict.fromkeys(f.variables + g.variables))
    else:
        vs = f.variables
    pieces: list[Piece] = []
    for p in f.pieces:
        for q in g.pieces:
            guard = conj([p.guard, q.guard])
            if guard == FALSE:
                continue
            diff = p.difference(q)
            if diff.is_constant:
                # order decided statically
                first_wins = diff.const >= 0 if take_max else diff.const <= 0
                pieces.append(Piece(guard, *( (p.body, p.denominator) if first_wins
                                              else (q.body, q.denominator))))
                continue
            # ties go to the left operand
            p_wins = LessEq(Term(), diff) if take_max else LessEq(diff, Term())
            pieces.append(Piece(conj([guard, p_wins]), p.body, p.denominator))
            pieces.append(Piece(conj([guard, Not(p_wins)]), q.body, q.denominator))
    return PWLinearFn(vs, tuple(_simplify_pieces(pieces)))


def _simplify_pieces(pieces: Iterable[Piece]) -> list[Piece]:
    from . import qe

    out = []
    for p in pieces:
        g = qe.simplify(p.guard) if p.guard not in (TRUE, FALSE) else p.guard
        if g == FALSE:
            continue
        out.append(Piece(g, p.body, p.denominator))
    return out


def pw_max(f: PWLinearFn, g: PWLinearFn) -> PWLinearFn:
    return _combine(f, g, True)


def pw_min(f: PWLinearFn, g: PWLinearFn) -> PWLinearFn:
    return _combine(f, g, False)
