from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from presburger.formula import (
    And, Cong, Eq, Exists, FormulaSyntaxError, Less, LessEq, Not, Or, Term,
    UnboundVariableError, compile_formula, compile_numpy, eval_formula, format_formula,
    free_vars, parse_formula, parse_term, substitute,
)

from generators import random_formula_any, random_qf

X, Y, T, U = (Term.var(v) for v in "xytu")


def test_parse_exists_double():
    assert parse_formula("exists y. x = y + y") == Exists("y", Eq(X, Y * 2))


def test_parse_congruence_and_order():
    f = parse_formula("x === 2 mod 3 & x > 0")
    assert f == And((Cong(X, 2, 3), Less(Term.constant(0), X)))


def test_zero_modulus_rejected():
    with pytest.raises((FormulaSyntaxError, ValueError), match="modulus"):
        parse_formula("x === 1 mod 0")


def test_syntax_error_has_position():
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("x < (y")
    assert info.value.pos >= 0


def test_multiplying_variables_is_rejected():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("x * y = 1")


def test_precedence():
    # ! > & > | > ->
    f = parse_formula("x = 0 | x = 1 & !x = 2 -> x < 5")
    g = parse_formula("(x = 0 | (x = 1 & (!(x = 2)))) -> x < 5")
    assert f == g


def test_quantifier_extends_right():
    f = parse_formula("exists y. x = y & y > 0")
    assert isinstance(f, Exists)
    assert free_vars(f) == {"x"}


def test_eval_examples():
    assert eval_formula(Cong(X, 2, 3), {"x": 5})
    assert not eval_formula(Less(X, X), {"x": 0})
    f = And((LessEq(U + X, T), Cong(T, 1, 2)))
    assert eval_formula(f, {"u": 2, "x": 0, "t": 3})


def test_eval_unbound_variable():
    with pytest.raises(UnboundVariableError):
        eval_formula(Less(X, Y), {"x": 1})


def test_eval_quantified_delegates():
    assert eval_formula(parse_formula("exists y. x = y + y"), {"x": 6})
    assert not eval_formula(parse_formula("exists y. x = y + y"), {"x": 7})


def test_term_canonical_form_drops_zeros():
    t = X + Y - Y
    assert t.vars == {"x"}
    assert t == X


def test_parse_term():
    assert parse_term("3*x - 2 + -y") == X * 3 - Y - 2


def test_substitute():
    f = parse_formula("x < y")
    assert substitute(f, "y", X + 1) == Less(X, X + 1)


def test_round_trip_random():
    rng = random.Random(0)
    for _ in range(1000):
        f = random_formula_any(rng, rng.randint(0, 6))
        assert parse_formula(format_formula(f)) == f


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000), st.integers(-30, 30), st.integers(-30, 30))
def test_boolean_laws(seed, x, y):
    rng = random.Random(seed)
    f = random_qf(rng, ["x", "y"], depth=2)
    g = random_qf(rng, ["x", "y"], depth=2)
    env = {"x": x, "y": y}
    assert eval_formula(Not(f), env) == (not eval_formula(f, env))
    assert eval_formula(And((f, g)), env) == (eval_formula(f, env) and eval_formula(g, env))
    assert eval_formula(Or((f, g)), env) == (eval_formula(f, env) or eval_formula(g, env))


@given(st.integers(-50, 50), st.integers(-100, 100), st.integers(1, 12))
def test_congruence_residue_canonical(x, k, n):
    f = Cong(X, k, n)
    assert f.residue == k % n
    assert eval_formula(f, {"x": x}) == ((x - k) % n == 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_compiled_evaluators_agree(seed):
    import numpy as np

    rng = random.Random(seed)
    f = random_qf(rng, ["x", "y"], depth=2)
    pred = compile_formula(f, ["x", "y"])
    npred = compile_numpy(f, ["x", "y"])
    xs, ys = np.meshgrid(np.arange(-6, 7), np.arange(-6, 7), indexing="ij")
    mask = np.broadcast_to(npred([xs, ys]), xs.shape)
    for i in range(xs.shape[0]):
        for j in range(xs.shape[1]):
            p = (int(xs[i, j]), int(ys[i, j]))
            want = eval_formula(f, {"x": p[0], "y": p[1]})
            assert pred(p) == want
            assert bool(mask[i, j]) == want
