"""Presburger formulas over the integers: terms, AST, text grammar, evaluation.

Grammar (ASCII)::

    term    := INT | VAR | term "+" term | term "-" term | INT "*" VAR | "-" term
    atom    := term ("<" | "<=" | "=" | ">" | ">=") term | term "===" term "mod" INT
    formula := atom | "!" formula | formula "&" formula | formula "|" formula
             | formula "->" formula | "exists" VAR "." formula
             | "forall" VAR "." formula | "(" formula ")"

Precedence is ``!`` > ``&`` > ``|`` > ``->`` (``->`` associates to the right);
quantifier bodies extend as far right as possible. The constants true and
false are the atoms ``0 = 0`` and ``0 < 0``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

__all__ = [
    "Term", "Formula", "Less", "LessEq", "Eq", "Cong", "Not", "And", "Or",
    "Implies", "Exists", "Forall", "TRUE", "FALSE", "conj", "disj",
    "parse_formula", "parse_term", "format_formula", "eval_formula",
    "free_vars", "is_quantifier_free", "rename", "substitute", "compile_formula",
    "compile_numpy", "map_terms", "fresh_names",
    "FormulaSyntaxError", "UnboundVariableError",
]


class FormulaSyntaxError(ValueError):
    """Raised on malformed formula text; ``pos`` is the character offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class UnboundVariableError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Term:
    """Affine integer form ``sum(c_v * v) + const``.

    ``coeffs`` is kept canonical: sorted by variable name, no zero entries.
    Any mapping or iterable of pairs is accepted on construction.
    """

    coeffs: tuple[tuple[str, int], ...] = ()
    const: int = 0

    def __post_init__(self):
        items = self.coeffs.items() if isinstance(self.coeffs, Mapping) else self.coeffs
        merged: dict[str, int] = {}
        for name, c in items:
            merged[name] = merged.get(name, 0) + int(c)
        canon = tuple(sorted((v, c) for v, c in merged.items() if c != 0))
        object.__setattr__(self, "coeffs", canon)
        object.__setattr__(self, "const", int(self.const))

    @classmethod
    def var(cls, name: str, coeff: int = 1) -> Term:
        return cls(((name, coeff),))

    @classmethod
    def constant(cls, value: int) -> Term:
        return cls((), value)

    @property
    def vars(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.coeffs)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    def coeff(self, name: str) -> int:
        for v, c in self.coeffs:
            if v == name:
                return c
        return 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    def content(self) -> int:
        """gcd of the variable coefficients (0 for a constant term)."""
        g = 0
        for _, c in self.coeffs:
            g = math.gcd(g, c)
        return g

    def without(self, name: str) -> Term:
        return Term(tuple((v, c) for v, c in self.coeffs if v != name), self.const)

    def __add__(self, other: Term | int) -> Term:
        if isinstance(other, int):
            return Term(self.coeffs, self.const + other)
        return Term(self.coeffs + other.coeffs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> Term:
        return Term(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other: Term | int) -> Term:
        return self + (-other)

    def __rsub__(self, other: int) -> Term:
        return (-self) + other

    def __mul__(self, k: int) -> Term:
        if not isinstance(k, int):
            return NotImplemented
        return Term(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    __rmul__ = __mul__

    def evaluate(self, assignment: Mapping[str, int]) -> int:
        total = self.const
        for v, c in self.coeffs:
            try:
                total += c * assignment[v]
            except KeyError:
                raise UnboundVariableError(v) from None
        return total

    def substitute(self, name: str, replacement: Term) -> Term:
        c = self.coeff(name)
        if c == 0:
            return self
        return self.without(name) + replacement * c

    def rename(self, mapping: Mapping[str, str]) -> Term:
        return Term(tuple((mapping.get(v, v), c) for v, c in self.coeffs), self.const)

    def __str__(self) -> str:
        return format_term(self)


def format_term(t: Term) -> str:
    parts: list[str] = []
    for v, c in t.coeffs:
        mag = abs(c)
        body = v if mag == 1 else f"{mag}*{v}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    if t.const or not parts:
        if not parts:
            parts.append(str(t.const))
        else:
            parts.append(f"+ {t.const}" if t.const > 0 else f"- {-t.const}")
    return " ".join(parts)


ZERO = Term()

# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Less:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class LessEq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Cong:
    """``term === residue (mod modulus)``.

    Normalised on construction: the constant of ``term`` is folded into the
    residue and ``0 <= residue < modulus``.
    """

    term: Term
    residue: int
    modulus: int

    def __post_init__(self):
        if self.modulus <= 0:
            raise ValueError(f"modulus must be positive, got {self.modulus}")
        residue = (self.residue - self.term.const) % self.modulus
        object.__setattr__(self, "term", Term(self.term.coeffs, 0))
        object.__setattr__(self, "residue", residue)


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


Formula = Union[Less, LessEq, Eq, Cong, Not, And, Or, Implies, Exists, Forall]
ATOMS = (Less, LessEq, Eq, Cong)

TRUE: Formula = Eq(ZERO, ZERO)
FALSE: Formula = Less(ZERO, ZERO)


def conj(parts: Iterable[Formula]) -> Formula:
    """Conjunction with trivial simplification (drops TRUE, short-circuits FALSE)."""
    out: list[Formula] = []
    for p in parts:
        if p == FALSE:
            return FALSE
        if p == TRUE or p in out:
            continue
        out.append(p)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(parts: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for p in parts:
        if p == TRUE:
            return TRUE
        if p == FALSE or p in out:
            continue
        out.append(p)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, (Less, LessEq, Eq)):
        return f.lhs.vars | f.rhs.vars
    if isinstance(f, Cong):
        return f.term.vars
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: frozenset[str] = frozenset()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, Implies):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, ATOMS):
        return True
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, (And, Or)):
        return all(is_quantifier_free(a) for a in f.args)
    if isinstance(f, Implies):
        return is_quantifier_free(f.lhs) and is_quantifier_free(f.rhs)
    return False


def map_terms(f: Formula, fn: Callable[[Term], Term]) -> Formula:
    """Apply ``fn`` to every term of a quantifier-free formula."""
    if isinstance(f, Less):
        return Less(fn(f.lhs), fn(f.rhs))
    if isinstance(f, LessEq):
        return LessEq(fn(f.lhs), fn(f.rhs))
    if isinstance(f, Eq):
        return Eq(fn(f.lhs), fn(f.rhs))
    if isinstance(f, Cong):
        shifted = fn(f.term)
        return Cong(shifted, f.residue, f.modulus)
    if isinstance(f, Not):
        return Not(map_terms(f.arg, fn))
    if isinstance(f, And):
        return And(tuple(map_terms(a, fn) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(map_terms(a, fn) for a in f.args))
    if isinstance(f, Implies):
        return Implies(map_terms(f.lhs, fn), map_terms(f.rhs, fn))
    raise ValueError("map_terms needs a quantifier-free formula")


def substitute(f: Formula, name: str, replacement: Term) -> Formula:
    """Replace free occurrences of ``name`` by ``replacement``.

    Bound variables that would capture a variable of ``replacement`` are
    renamed first.
    """
    if isinstance(f, (Exists, Forall)):
        if f.var == name:
            return f
        body, var = f.body, f.var
        if var in replacement.vars:
            fresh = _fresh(var, free_vars(body) | replacement.vars | {name})
            body = substitute(body, var, Term.var(fresh))
            var = fresh
        return type(f)(var, substitute(body, name, replacement))
    if isinstance(f, Not):
        return Not(substitute(f.arg, name, replacement))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(substitute(a, name, replacement) for a in f.args))
    if isinstance(f, Implies):
        return Implies(substitute(f.lhs, name, replacement),
                       substitute(f.rhs, name, replacement))
    return map_terms(f, lambda t: t.substitute(name, replacement))


def rename(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Simultaneous renaming of free variables in a quantifier-free formula."""
    if not mapping:
        return f
    return map_terms(f, lambda t: t.rename(mapping))


def _fresh(base: str, avoid: Iterable[str]) -> str:
    avoid = set(avoid)
    i = 0
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def fresh_names(bases: Sequence[str], avoid: Iterable[str]) -> list[str]:
    """Deterministic fresh variable names, distinct from ``avoid`` and each other."""
    taken = set(avoid)
    out = []
    for b in bases:
        name = b if b not in taken else _fresh(b + "_", taken)
        taken.add(name)
        out.append(name)
    return out


# ---------------------------------------------------------------------------
# Evaluation


def eval_formula(f: Formula, assignment: Mapping[str, int]) -> bool:
    """Truth value of ``f`` in the standard model under ``assignment``.

    Quantified subformulas are decided by quantifier elimination.
    """
    if isinstance(f, Less):
        return f.lhs.evaluate(assignment) < f.rhs.evaluate(assignment)
    if isinstance(f, LessEq):
        return f.lhs.evaluate(assignment) <= f.rhs.evaluate(assignment)
    if isinstance(f, Eq):
        return f.lhs.evaluate(assignment) == f.rhs.evaluate(assignment)
    if isinstance(f, Cong):
        return (f.term.evaluate(assignment) - f.residue) % f.modulus == 0
    if isinstance(f, Not):
        return not eval_formula(f.arg, assignment)
    if isinstance(f, And):
        return all(eval_formula(a, assignment) for a in f.args)
    if isinstance(f, Or):
        return any(eval_formula(a, assignment) for a in f.args)
    if isinstance(f, Implies):
        return (not eval_formula(f.lhs, assignment)) or eval_formula(f.rhs, assignment)
    if isinstance(f, (Exists, Forall)):
        from .qe import decide_sentence

        closed = f
        for v in sorted(free_vars(f)):
            if v not in assignment:
                raise UnboundVariableError(v)
            closed = substitute(closed, v, Term.constant(assignment[v]))
        return decide_sentence(closed)
    raise TypeError(f"not a formula: {f!r}")


def _py_term(t: Term, index: Mapping[str, int]) -> str:
    parts = [f"{c}*p[{index[v]}]" for v, c in t.coeffs]
    parts.append(str(t.const))
    return "(" + " + ".join(parts) + ")"


def _py(f: Formula, index: Mapping[str, int]) -> str:
    if isinstance(f, Less):
        return f"({_py_term(f.lhs, index)} < {_py_term(f.rhs, index)})"
    if isinstance(f, LessEq):
        return f"({_py_term(f.lhs, index)} <= {_py_term(f.rhs, index)})"
    if isinstance(f, Eq):
        return f"({_py_term(f.lhs, index)} == {_py_term(f.rhs, index)})"
    if isinstance(f, Cong):
        return f"(({_py_term(f.term, index)} - {f.residue}) % {f.modulus} == 0)"
    if isinstance(f, Not):
        return f"(not {_py(f.arg, index)})"
    if isinstance(f, And):
        return "(" + " and ".join(_py(a, index) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(" + " or ".join(_py(a, index) for a in f.args) + ")"
    if isinstance(f, Implies):
        return f"((not {_py(f.lhs, index)}) or {_py(f.rhs, index)})"
    raise ValueError("only quantifier-free formulas can be compiled")


def compile_formula(f: Formula, variables: Sequence[str]) -> Callable[[Sequence[int]], bool]:
    """Compile a quantifier-free formula into a predicate on positional tuples.

    Used by the window scans, where per-point AST walking is too slow.
    """
    index = {v: i for i, v in enumerate(variables)}
    missing = free_vars(f) - index.keys()
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    src = f"lambda p: {_py(f, index)}"
    return eval(src, {"__builtins__": {}})  # noqa: S307 - generated from the AST


def _np(f: Formula, index: Mapping[str, int]) -> str:
    if isinstance(f, Less):
        return f"({_py_term(f.lhs, index)} < {_py_term(f.rhs, index)})"
    if isinstance(f, LessEq):
        return f"({_py_term(f.lhs, index)} <= {_py_term(f.rhs, index)})"
    if isinstance(f, Eq):
        return f"({_py_term(f.lhs, index)} == {_py_term(f.rhs, index)})"
    if isinstance(f, Cong):
        return f"(({_py_term(f.term, index)} - {f.residue}) % {f.modulus} == 0)"
    if isinstance(f, Not):
        return f"_not({_np(f.arg, index)})"
    if isinstance(f, And):
        return "_and(" + ", ".join(_np(a, index) for a in f.args) + ")"
    if isinstance(f, Or):
        return "_or(" + ", ".join(_np(a, index) for a in f.args) + ")"
    if isinstance(f, Implies):
        return f"_or(_not({_np(f.lhs, index)}), {_np(f.rhs, index)})"
    raise ValueError("only quantifier-free formulas can be compiled")


def compile_numpy(f: Formula, variables: Sequence[str]) -> Callable[[Sequence], object]:
    """Like :func:`compile_formula` but over broadcastable numpy arrays.

    ``p[i]`` may be an integer array or a scalar; the result is a boolean
    array (or numpy bool) of the broadcast shape.  Callers are responsible
    for choosing a dtype wide enough for the term values.
    """
    import functools

    import numpy as np

    index = {v: i for i, v in enumerate(variables)}
    missing = free_vars(f) - index.keys()
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    env = {
        "__builtins__": {},
        "_not": np.logical_not,
        "_and": lambda *a: functools.reduce(np.logical_and, a),
        "_or": lambda *a: functools.reduce(np.logical_or, a),
    }
    return eval(f"lambda p: {_np(f, index)}", env)  # noqa: S307


# ---------------------------------------------------------------------------
# Printing

_PREC = {Implies: 1, Or: 2, And: 3}


def format_formula(f: Formula) -> str:
    if isinstance(f, Less):
        return f"{f.lhs} < {f.rhs}"
    if isinstance(f, LessEq):
        return f"{f.lhs} <= {f.rhs}"
    if isinstance(f, Eq):
        return f"{f.lhs} = {f.rhs}"
    if isinstance(f, Cong):
        return f"{f.term} === {f.residue} mod {f.modulus}"
    if isinstance(f, Not):
        inner = format_formula(f.arg)
        if isinstance(f.arg, (*ATOMS, Not)):
            return f"!{inner}"
        return f"!({inner})"
    if isinstance(f, (And, Or)):
        op = " & " if isinstance(f, And) else " | "
        return op.join(_wrap(a, lambda c: type(c) in (And, Or, Implies, Exists, Forall)
                             and not (isinstance(f, Or) and isinstance(c, And)))
                       for a in f.args)
    if isinstance(f, Implies):
        # the right operand never needs parentheses: -> is right-associative
        left = _wrap(f.lhs, lambda c: isinstance(c, (Implies, Exists, Forall)))
        return f"{left} -> {format_formula(f.rhs)}"
    if isinstance(f, Exists):
        return f"exists {f.var}. {format_formula(f.body)}"
    if isinstance(f, Forall):
        return f"forall {f.var}. {format_formula(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


def _wrap(child: Formula, needs_parens: Callable[[Formula], bool]) -> str:
    s = format_formula(child)
    return f"({s})" if needs_parens(child) else s


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>===|<=|>=|->|[<>=!&|()+\-*.])
""", re.VERBOSE)

_KEYWORDS = {"exists", "forall", "mod"}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


@dataclass
class _Parser:
    text: str
    toks: list[_Tok] = field(default_factory=list)
    i: int = 0

    def __post_init__(self):
        pos = 0
        while pos < len(self.text):
            m = _TOKEN.match(self.text, pos)
            if not m:
                raise FormulaSyntaxError(f"unexpected character {self.text[pos]!r}", pos)
            kind = m.lastgroup
            if kind != "ws":
                word = m.group()
                if kind == "name" and word in _KEYWORDS:
                    kind = "kw"
                self.toks.append(_Tok(kind, word, pos))
            pos = m.end()
        self.toks.append(_Tok("eof", "", len(self.text)))

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().text == text and self.peek().kind in ("op", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind not in ("op", "kw"):
            raise FormulaSyntaxError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return self.next()

    # formula levels
    def formula(self) -> Formula:
        left = self.disjunction()
        if self.accept("->"):
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        args = [self.conjunction()]
        while self.accept("|"):
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self) -> Formula:
        args = [self.unary()]
        while self.accept("&"):
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self) -> Formula:
        tok = self.peek()
        if self.accept("!"):
            return Not(self.unary())
        if tok.kind == "kw" and tok.text in ("exists", "forall"):
            self.next()
            var = self.next()
            if var.kind != "name":
                raise FormulaSyntaxError("expected a variable after quantifier", var.pos)
            self.expect(".")
            body = self.formula()
            return Exists(var.text, body) if tok.text == "exists" else Forall(var.text, body)
        if self.accept("("):
            inner = self.formula()
            self.expect(")")
            return inner
        return self.atom()

    def atom(self) -> Formula:
        lhs = self.term()
        tok = self.next()
        if tok.kind != "op" or tok.text not in ("<", "<=", "=", ">", ">=", "==="):
            raise FormulaSyntaxError(f"expected a comparison, found {tok.text or 'end of input'!r}", tok.pos)
        rhs = self.term()
        if tok.text == "===":
            self.expect("mod")
            mtok = self.peek()
            negative = self.accept("-")
            num = self.next()
            if num.kind != "int":
                raise FormulaSyntaxError("expected an integer modulus", num.pos)
            modulus = -int(num.text) if negative else int(num.text)
            if modulus <= 0:
                raise FormulaSyntaxError("modulus must be positive", mtok.pos)
            return Cong(lhs - rhs, 0, modulus)
        return {
            "<": lambda: Less(lhs, rhs),
            "<=": lambda: LessEq(lhs, rhs),
            "=": lambda: Eq(lhs, rhs),
            ">": lambda: Less(rhs, lhs),
            ">=": lambda: LessEq(rhs, lhs),
        }[tok.text]()

    def term(self) -> Term:
        total = self.factor()
        while True:
            if self.accept("+"):
                total = total + self.factor()
            elif self.accept("-"):
                total = total - self.factor()
            else:
                return total

    def factor(self) -> Term:
        if self.accept("-"):
            return -self.factor()
        tok = self.next()
        if tok.kind == "int":
            if self.accept("*"):
                var = self.next()
                if var.kind != "name":
                    raise FormulaSyntaxError("expected a variable after '*'", var.pos)
                return Term.var(var.text, int(tok.text))
            return Term.constant(int(tok.text))
        if tok.kind == "name":
            return Term.var(tok.text)
        raise FormulaSyntaxError(f"expected a term, found {tok.text or 'end of input'!r}", tok.pos)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    tok = p.peek()
    if tok.kind != "eof":
        raise FormulaSyntaxError(f"unexpected {tok.text!r}", tok.pos)
    return f


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    tok = p.peek()
    if tok.kind != "eof":
        raise FormulaSyntaxError(f"unexpected {tok.text!r}", tok.pos)
    return t
