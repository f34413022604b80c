"""Cooper-style quantifier elimination for Presburger arithmetic.

Formulas are first put into negation normal form over five literal shapes::

    lt    0 < t
    eq    t = 0
    ne    t != 0
    dvd   m | t
    ndvd  not (m | t)

Each literal is kept normalised (coefficient gcd divided out, divisibility
coefficients reduced modulo ``m``), so substitution results constant-fold
early. Existentials distribute over disjunctions; a conjunction is
eliminated with an equality substitution when one is available and with
Cooper's least-witness expansion otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Union

from .formula import (
    FALSE, TRUE, And, Cong, Eq, Exists, Forall, Formula, Implies, Less, LessEq,
    Not, Or, Term, eval_formula, free_vars, is_quantifier_free,
)

__all__ = ["cooper_eliminate", "decide_sentence", "simplify", "FreeVariableError"]

#: DNF expansion is attempted only below this many conjunctions.
DNF_LIMIT = 256


class FreeVariableError(ValueError):
    pass


@dataclass(frozen=True)
class Lit:
    kind: str
    term: Term
    modulus: int = 0


@dataclass(frozen=True)
class _Conn:
    op: str  # "and" | "or"
    args: tuple


Node = Union[bool, Lit, _Conn]


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _div_term(t: Term, g: int) -> Term:
    return Term(tuple((v, c // g) for v, c in t.coeffs), t.const // g)


def _sign_canonical(t: Term) -> Term:
    if t.coeffs and t.coeffs[0][1] < 0:
        return -t
    return t


def mk_lit(kind: str, term: Term, modulus: int = 0) -> Node:
    """Build a normalised literal, folding it to a bool when decidable."""
    if kind == "lt":
        if term.is_constant:
            return term.const > 0
        g = term.content()
        if g > 1:
            term = Term(tuple((v, c // g) for v, c in term.coeffs), -((-term.const) // g))
        return Lit("lt", term)
    if kind in ("eq", "ne"):
        want = kind == "eq"
        if term.is_constant:
            return (term.const == 0) == want
        g = term.content()
        if term.const % g:
            return not want
        if g > 1:
            term = _div_term(term, g)
        return Lit(kind, _sign_canonical(term))
    if kind in ("dvd", "ndvd"):
        want = kind == "dvd"
        m = modulus
        if m == 1:
            return want
        half = m // 2
        coeffs = []
        for v, c in term.coeffs:
            r = c % m
            if r > half:
                r -= m
            if r:
                coeffs.append((v, r))
        t = Term(tuple(coeffs), term.const % m)
        if t.is_constant:
            return (t.const % m == 0) == want
        if t.coeffs[0][1] < 0:
            t = -t
            t = Term(t.coeffs, t.const % m)
        g = math.gcd(m, t.content())
        if t.const % g:
            return not want
        g = math.gcd(g, t.const)
        if g > 1:
            m //= g
            t = _div_term(t, g)
            return mk_lit(kind, t, m)
        return Lit(kind, t, m)
    raise ValueError(kind)


def negate_lit(lit: Lit) -> Node:
    if lit.kind == "lt":
        return mk_lit("lt", -lit.term + 1)
    flip = {"eq": "ne", "ne": "eq", "dvd": "ndvd", "ndvd": "dvd"}[lit.kind]
    return Lit(flip, lit.term, lit.modulus)


def _linear_key(t: Term) -> tuple:
    return t.coeffs


def mk_and(parts: Iterable[Node]) -> Node:
    flat: dict = {}
    for p in parts:
        if p is True:
            continue
        if p is False:
            return False
        if isinstance(p, _Conn) and p.op == "and":
            for q in p.args:
                flat[q] = None
        else:
            flat[p] = None
    args = _prune_and(list(flat))
    if args is False:
        return False
    if not args:
        return True
    return args[0] if len(args) == 1 else _Conn("and", tuple(args))


def mk_or(parts: Iterable[Node]) -> Node:
    flat: dict = {}
    for p in parts:
        if p is False:
            continue
        if p is True:
            return True
        if isinstance(p, _Conn) and p.op == "or":
            for q in p.args:
                flat[q] = None
        else:
            flat[p] = None
    args = _prune_or(list(flat))
    if args is True:
        return True
    if not args:
        return False
    return args[0] if len(args) == 1 else _Conn("or", tuple(args))


def _prune_and(args: list) -> list | bool:
    """Merge order literals sharing a linear part; detect clashes."""
    lows: dict[tuple, int] = {}
    eqs: dict[tuple, int] = {}
    others = []
    for a in args:
        if isinstance(a, Lit) and a.kind == "lt":
            key = _linear_key(a.term)
            lows[key] = min(lows.get(key, a.term.const), a.term.const)
        elif isinstance(a, Lit) and a.kind == "eq":
            key = _linear_key(a.term)
            if key in eqs and eqs[key] != a.term.const:
                return False
            eqs[key] = a.term.const
        else:
            others.append(a)
    # 0 < s + c1 and 0 < -s + c2 need c1 + c2 >= 2
    for key, c in lows.items():
        neg = _linear_key(-Term(key))
        if neg in lows and c + lows[neg] < 2:
            return False
    out: list = []
    for key, c in eqs.items():
        # s = -c: check order literals on +-s
        if key in lows and not (-c + lows[key] > 0):
            return False
        neg = _linear_key(-Term(key))
        if neg in lows and not (c + lows[neg] > 0):
            return False
        out.append(Lit("eq", Term(key, c)))
    for key, c in lows.items():
        neg = _linear_key(-Term(key))
        if key in eqs or neg in eqs:
            continue
        out.append(Lit("lt", Term(key, c)))
    seen = set(out)
    for a in others:
        if isinstance(a, Lit):
            n = negate_lit(a)
            if n in seen:
                return False
            if a.kind == "ne":
                e = Lit("eq", a.term)
                if e in seen:
                    return False
        seen.add(a)
        out.append(a)
    return out


def _prune_or(args: list) -> list | bool:
    highs: dict[tuple, int] = {}
    others = []
    for a in args:
        if isinstance(a, Lit) and a.kind == "lt":
            key = _linear_key(a.term)
            highs[key] = max(highs.get(key, a.term.const), a.term.const)
        else:
            others.append(a)
    for key, c in highs.items():
        neg = _linear_key(-Term(key))
        if neg in highs and c + highs[neg] > 0:
            return True
    out: list = [Lit("lt", Term(key, c)) for key, c in highs.items()]
    seen = set(out)
    for a in others:
        if isinstance(a, Lit):
            n = negate_lit(a)
            if n in seen:
                return True
        seen.add(a)
        out.append(a)
    return out


# ---------------------------------------------------------------------------
# conversion


def to_nnf(f: Formula, negate: bool = False) -> Node:
    if isinstance(f, Less):
        t = f.rhs - f.lhs
        return mk_lit("lt", -t + 1) if negate else mk_lit("lt", t)
    if isinstance(f, LessEq):
        t = f.rhs - f.lhs
        return mk_lit("lt", -t) if negate else mk_lit("lt", t + 1)
    if isinstance(f, Eq):
        return mk_lit("ne" if negate else "eq", f.lhs - f.rhs)
    if isinstance(f, Cong):
        return mk_lit("ndvd" if negate else "dvd", f.term - f.residue, f.modulus)
    if isinstance(f, Not):
        return to_nnf(f.arg, not negate)
    if isinstance(f, And):
        parts = (to_nnf(a, negate) for a in f.args)
        return mk_or(parts) if negate else mk_and(parts)
    if isinstance(f, Or):
        parts = (to_nnf(a, negate) for a in f.args)
        return mk_and(parts) if negate else mk_or(parts)
    if isinstance(f, Implies):
        if negate:
            return mk_and([to_nnf(f.lhs), to_nnf(f.rhs, True)])
        return mk_or([to_nnf(f.lhs, True), to_nnf(f.rhs)])
    raise ValueError("to_nnf expects a quantifier-free formula")


def _split_sides(t: Term) -> tuple[Term, Term]:
    pos = Term(tuple((v, c) for v, c in t.coeffs if c > 0))
    neg = Term(tuple((v, -c) for v, c in t.coeffs if c < 0))
    return pos, neg


def lit_to_formula(lit: Lit) -> Formula:
    t = lit.term
    pos, neg = _split_sides(t)
    c = t.const
    if lit.kind == "lt":
        if c == 0:
            return Less(neg, pos)
        # 0 < pos - neg + c  <=>  neg + (1 - c) <= pos
        if 1 - c >= 0:
            return LessEq(neg + (1 - c), pos)
        return LessEq(neg, pos + (c - 1))
    if lit.kind in ("eq", "ne"):
        # eq/ne terms are sign-canonical, so ``pos`` is never empty
        atom = Eq(pos, neg + (-c)) if c <= 0 else Eq(pos + c, neg)
        return atom if lit.kind == "eq" else Not(atom)
    atom = Cong(t, 0, lit.modulus)
    return atom if lit.kind == "dvd" else Not(atom)


def to_formula(node: Node) -> Formula:
    if node is True:
        return TRUE
    if node is False:
        return FALSE
    if isinstance(node, Lit):
        return lit_to_formula(node)
    parts = [to_formula(a) for a in node.args]
    return And(tuple(parts)) if node.op == "and" else Or(tuple(parts))


# ---------------------------------------------------------------------------
# node utilities


def node_vars(node: Node) -> frozenset[str]:
    if isinstance(node, bool):
        return frozenset()
    if isinstance(node, Lit):
        return node.term.vars
    out: frozenset[str] = frozenset()
    for a in node.args:
        out |= node_vars(a)
    return out


def _literals(node: Node) -> Iterable[Lit]:
    if isinstance(node, Lit):
        yield node
    elif isinstance(node, _Conn):
        for a in node.args:
            yield from _literals(a)


def _map_lits(node: Node, fn) -> Node:
    if isinstance(node, bool):
        return node
    if isinstance(node, Lit):
        return fn(node)
    parts = (_map_lits(a, fn) for a in node.args)
    return mk_and(parts) if node.op == "and" else mk_or(parts)


def subst_node(node: Node, x: str, repl: Term) -> Node:
    def fn(lit: Lit) -> Node:
        if lit.term.coeff(x) == 0:
            return lit
        return mk_lit(lit.kind, lit.term.substitute(x, repl), lit.modulus)
    return _map_lits(node, fn)


def _dnf(node: Node, limit: int) -> list[list[Node]] | None:
    if isinstance(node, (bool, Lit)):
        return [[node]]
    if node.op == "or":
        out = []
        for a in node.args:
            sub = _dnf(a, limit)
            if sub is None:
                return None
            out.extend(sub)
            if len(out) > limit:
                return None
        return out
    acc: list[list[Node]] = [[]]
    for a in node.args:
        sub = _dnf(a, limit)
        if sub is None or len(acc) * len(sub) > limit:
            return None
        acc = [c + d for c in acc for d in sub]
    return acc


# ---------------------------------------------------------------------------
# elimination


def _normalise_coefficients(x: str, node: Node) -> tuple[Node, int]:
    """Scale literals so every coefficient of ``x`` is +-1 (for ``x`` := l*x)."""
    coeffs = [abs(l.term.coeff(x)) for l in _literals(node) if l.term.coeff(x)]
    l = reduce(_lcm, coeffs, 1)
    if l == 1:
        return node, 1

    def fn(lit: Lit) -> Node:
        a = lit.term.coeff(x)
        if a == 0:
            return lit
        k = l // abs(a)
        rest = lit.term.without(x) * k
        t = rest + Term.var(x, 1 if a > 0 else -1)
        modulus = lit.modulus * k if lit.kind in ("dvd", "ndvd") else 0
        return mk_lit(lit.kind, t, modulus)

    return mk_and([_map_lits(node, fn), mk_lit("dvd", Term.var(x), l)]), l


def _cooper(x: str, node: Node) -> Node:
    node, _ = _normalise_coefficients(x, node)
    if x not in node_vars(node):
        return node
    # equality shortcut at the top of a conjunction
    if isinstance(node, Lit) or (isinstance(node, _Conn) and node.op == "and"):
        conjuncts = node.args if isinstance(node, _Conn) else (node,)
        for lit in conjuncts:
            if isinstance(lit, Lit) and lit.kind == "eq" and lit.term.coeff(x):
                a = lit.term.coeff(x)
                rest = lit.term.without(x)
                value = -rest if a == 1 else rest
                return subst_node(node, x, value)

    lower: list[Term] = []
    upper: list[Term] = []
    period = 1
    for lit in _literals(node):
        a = lit.term.coeff(x)
        if a == 0:
            continue
        rest = lit.term.without(x)
        if lit.kind in ("dvd", "ndvd"):
            period = _lcm(period, lit.modulus)
        elif lit.kind == "lt":
            if a == 1:
                lower.append(-rest)          # x > -rest
            else:
                upper.append(rest)           # x < rest
        elif lit.kind == "eq":
            value = -rest if a == 1 else rest
            lower.append(value - 1)
            upper.append(value + 1)
        else:  # ne
            value = -rest if a == 1 else rest
            lower.append(value)
            upper.append(value)
    lower = list(dict.fromkeys(lower))
    upper = list(dict.fromkeys(upper))

    use_lower = len(lower) <= len(upper)

    def at_infinity(lit: Lit) -> Node:
        a = lit.term.coeff(x)
        if a == 0 or lit.kind in ("dvd", "ndvd"):
            return lit
        if lit.kind == "lt":
            # towards -inf, "x > .." fails; towards +inf, "x < .." fails
            return (a == -1) if use_lower else (a == 1)
        return lit.kind == "ne"

    inf_node = _map_lits(node, at_infinity)
    disjuncts: list[Node] = []
    for j in range(1, period + 1):
        shift = j if use_lower else -j
        disjuncts.append(subst_node(inf_node, x, Term.constant(shift)))
        if disjuncts[-1] is True:
            return True
    bounds = lower if use_lower else upper
    for b in bounds:
        for j in range(1, period + 1):
            value = b + j if use_lower else b - j
            d = subst_node(node, x, value)
            if d is True:
                return True
            disjuncts.append(d)
    return mk_or(disjuncts)


def _exists(x: str, node: Node) -> Node:
    if x not in node_vars(node):
        return node
    if isinstance(node, _Conn) and node.op == "or":
        return mk_or(_exists(x, a) for a in node.args)
    if isinstance(node, _Conn) and node.op == "and":
        inner = [a for a in node.args if x in node_vars(a)]
        outer = [a for a in node.args if x not in node_vars(a)]
        body = mk_and(inner)
        if all(isinstance(a, Lit) for a in inner):
            return mk_and(outer + [_cooper(x, body)])
        cubes = _dnf(body, DNF_LIMIT)
        if cubes is not None:
            return mk_and(outer + [mk_or(_cooper(x, mk_and(c)) for c in cubes)])
        return mk_and(outer + [_cooper(x, body)])
    return _cooper(x, node)


def _negate_node(node: Node) -> Node:
    if isinstance(node, bool):
        return not node
    if isinstance(node, Lit):
        return negate_lit(node)
    parts = (_negate_node(a) for a in node.args)
    return mk_or(parts) if node.op == "and" else mk_and(parts)


def _eliminate(f: Formula) -> Node:
    if is_quantifier_free(f):
        return to_nnf(f)
    if isinstance(f, Exists):
        return _exists(f.var, _eliminate(f.body))
    if isinstance(f, Forall):
        return _negate_node(_exists(f.var, _negate_node(_eliminate(f.body))))
    if isinstance(f, Not):
        return _negate_node(_eliminate(f.arg))
    if isinstance(f, And):
        return mk_and(_eliminate(a) for a in f.args)
    if isinstance(f, Or):
        return mk_or(_eliminate(a) for a in f.args)
    if isinstance(f, Implies):
        return mk_or([_negate_node(_eliminate(f.lhs)), _eliminate(f.rhs)])
    raise TypeError(f"not a formula: {f!r}")


def cooper_eliminate(f: Formula) -> Formula:
    """Quantifier-free formula equivalent to ``f`` over the integers.

    Inner quantifiers are eliminated first, so bound variables never need
    renaming. Universal quantifiers go through ``not exists not``.
    """
    return to_formula(_eliminate(f))


def simplify(f: Formula) -> Formula:
    """Constant folding, duplicate-literal removal and modulus reduction."""
    return cooper_eliminate(f)


def decide_sentence(f: Formula) -> bool:
    """Truth value of a closed formula."""
    fv = free_vars(f)
    if fv:
        raise FreeVariableError(f"sentence has free variables: {', '.join(sorted(fv))}")
    node = _eliminate(f)
    if isinstance(node, bool):
        return node
    return eval_formula(to_formula(node), {})


def qf_size(f: Formula) -> int:
    """Number of atoms; a rough measure of elimination blow-up."""
    if isinstance(f, (Not,)):
        return qf_size(f.arg)
    if isinstance(f, (And, Or)):
        return sum(qf_size(a) for a in f.args)
    if isinstance(f, Implies):
        return qf_size(f.lhs) + qf_size(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return qf_size(f.body)
    return 1
