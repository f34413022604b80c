"""Independent oracles: z3 for quantified formulas, brute force elsewhere."""

from __future__ import annotations

import z3

from presburger.formula import (
    And, Cong, Eq, Exists, Forall, Formula, Implies, Less, LessEq, Not, Or, Term,
    free_vars,
)


def z3_term(t: Term, env):
    expr = z3.IntVal(t.const)
    for v, c in t.coeffs:
        expr = expr + c * env[v]
    return expr


def to_z3(f: Formula, env=None):
    env = dict(env or {})
    for v in free_vars(f):
        env.setdefault(v, z3.Int(v))
    return _z3(f, env)


def _z3(f, env):
    if isinstance(f, Less):
        return z3_term(f.lhs, env) < z3_term(f.rhs, env)
    if isinstance(f, LessEq):
        return z3_term(f.lhs, env) <= z3_term(f.rhs, env)
    if isinstance(f, Eq):
        return z3_term(f.lhs, env) == z3_term(f.rhs, env)
    if isinstance(f, Cong):
        return (z3_term(f.term, env) - f.residue) % f.modulus == 0
    if isinstance(f, Not):
        return z3.Not(_z3(f.arg, env))
    if isinstance(f, And):
        return z3.And([_z3(a, env) for a in f.args])
    if isinstance(f, Or):
        return z3.Or([_z3(a, env) for a in f.args])
    if isinstance(f, Implies):
        return z3.Implies(_z3(f.lhs, env), _z3(f.rhs, env))
    if isinstance(f, (Exists, Forall)):
        inner = dict(env)
        var = z3.Int(f"{f.var}!{id(f)}")
        inner[f.var] = var
        body = _z3(f.body, inner)
        return z3.Exists([var], body) if isinstance(f, Exists) else z3.ForAll([var], body)
    raise TypeError(f)


def z3_eliminate(f: Formula, timeout_ms: int = 10_000):
    """Quantifier-free equivalent of ``f`` computed by z3's QE tactics.

    Returns ``None`` when every tactic times out.
    """
    expr = to_z3(f)
    for name in ("qe2", "qe"):
        try:
            result = z3.TryFor(z3.Tactic(name), timeout_ms)(expr)
        except z3.Z3Exception:
            continue
        out = z3.simplify(result.as_expr())
        if not _has_quantifier(out):
            return out
    return None


def _has_quantifier(e) -> bool:
    if z3.is_quantifier(e):
        return True
    return any(_has_quantifier(c) for c in e.children())


def z3_predicate(expr, variables):
    """Compile a quantifier-free z3 integer expression into a Python callable."""
    index = {v: i for i, v in enumerate(variables)}

    def build(e):
        if z3.is_true(e):
            return lambda p: True
        if z3.is_false(e):
            return lambda p: False
        if z3.is_int_value(e):
            n = e.as_long()
            return lambda p: n
        if z3.is_const(e):
            i = index[e.decl().name()]
            return lambda p: p[i]
        k = e.decl().kind()
        args = [build(c) for c in e.children()]
        if k == z3.Z3_OP_AND:
            return lambda p: all(a(p) for a in args)
        if k == z3.Z3_OP_OR:
            return lambda p: any(a(p) for a in args)
        if k == z3.Z3_OP_NOT:
            a = args[0]
            return lambda p: not a(p)
        if k == z3.Z3_OP_IMPLIES:
            a, b = args
            return lambda p: (not a(p)) or b(p)
        if k == z3.Z3_OP_ITE:
            c, a, b = args
            return lambda p: a(p) if c(p) else b(p)
        if k == z3.Z3_OP_ADD:
            return lambda p: sum(a(p) for a in args)
        if k == z3.Z3_OP_SUB:
            a0, rest = args[0], args[1:]
            return lambda p: a0(p) - sum(a(p) for a in rest)
        if k == z3.Z3_OP_UMINUS:
            a = args[0]
            return lambda p: -a(p)
        if k == z3.Z3_OP_MUL:
            def mul(p):
                r = 1
                for a in args:
                    r *= a(p)
                return r
            return mul
        binary = {
            z3.Z3_OP_EQ: lambda x, y: x == y,
            z3.Z3_OP_DISTINCT: lambda x, y: x != y,
            z3.Z3_OP_LE: lambda x, y: x <= y,
            z3.Z3_OP_LT: lambda x, y: x < y,
            z3.Z3_OP_GE: lambda x, y: x >= y,
            z3.Z3_OP_GT: lambda x, y: x > y,
            # z3 integer mod/div agree with Python's for positive divisors
            z3.Z3_OP_MOD: lambda x, y: x % abs(y),
            z3.Z3_OP_IDIV: lambda x, y: x // y if y > 0 else -(x // -y),
        }
        if k in binary and len(args) == 2:
            op, (a, b) = binary[k], args
            return lambda p: op(a(p), b(p))
        raise NotImplementedError(f"unsupported z3 operator {e.decl()}")

    return build(expr)


def z3_disagreements(f: Formula, g: Formula, box: int, variables) -> list:
    """Points of ``[-box, box]^vars`` where ``f`` and ``g`` differ (at most one)."""
    env = {v: z3.Int(v) for v in variables}
    s = z3.Solver()
    s.set("timeout", 120_000)
    for v in env.values():
        s.add(v >= -box, v <= box)
    s.add(to_z3(f, env) != to_z3(g, env))
    r = s.check()
    if r == z3.unsat:
        return []
    if r == z3.unknown:
        raise RuntimeError("z3 returned unknown")
    m = s.model()
    return [{v: m.eval(env[v], model_completion=True).as_long() for v in variables}]


def positional(f: Formula, coords, prefix: str = "p") -> Formula:
    """Rename ``coords`` to ``p0, p1, ...`` (simultaneously)."""
    from presburger.formula import rename

    return rename(f, {c: f"{prefix}{i}" for i, c in enumerate(coords)})


def diamond_predicate(a, b, m: int) -> tuple[Formula, list[str]]:
    """``(x, z) in A and (y, z) in B`` over ``p0 .. p(2m+n)``, straight from
    the definition of the diamond product."""
    from presburger.formula import conj, rename

    dim = 2 * m + len(a.coords) - m
    names = [f"p{i}" for i in range(dim)]
    a_pos = names[:m] + names[2 * m:]
    b_pos = names[m:2 * m] + names[2 * m:]
    fa = rename(a.to_formula(), dict(zip(a.coords, [f"_a{i}" for i in range(len(a.coords))])))
    fa = rename(fa, {f"_a{i}": n for i, n in enumerate(a_pos)})
    fb = rename(b.to_formula(), dict(zip(b.coords, [f"_b{i}" for i in range(len(b.coords))])))
    fb = rename(fb, {f"_b{i}": n for i, n in enumerate(b_pos)})
    return conj([fa, fb]), names
