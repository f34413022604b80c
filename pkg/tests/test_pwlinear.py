from __future__ import annotations

import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from presburger.formula import Term, parse_formula, parse_term
from presburger.pwlinear import PWLinearFn, Piece, ceil_div, floor_div, pw_max, pw_min

from generators import random_pw

BOX = range(-9, 10)


def test_parse_single_and_guarded():
    f = PWLinearFn.parse("x - y")
    assert f.variables == ("x", "y") and f(5, 2) == 3
    g = PWLinearFn.parse("x < y: y - x; x >= y: x - y")
    assert all(g(x, y) == abs(x - y) for x, y in itertools.product(BOX, BOX))
    assert g.check_partition() is None


def test_partition_problems_found():
    gap = PWLinearFn.parse("x > 0: x; x < 0: -x")
    kind, w = gap.check_partition()
    assert kind == "gap" and w == {"x": 0}
    over = PWLinearFn.parse("x >= 0: x; x <= 0: -x")
    kind, w = over.check_partition()
    assert kind == "overlap" and w == {"x": 0}


def test_undefined_outside_guards():
    f = PWLinearFn.parse("x >= 5: x")
    assert f(4) is None and f(5) == 5


def test_undeclared_variable_rejected():
    with pytest.raises(ValueError):
        PWLinearFn(("x",), (Piece(parse_formula("y > 0"), parse_term("x")),))


@pytest.mark.parametrize("a", [1, 2, 3, 5])
def test_floor_and_ceil(a):
    t = parse_term("2*x - y + 1")
    fl, ce = floor_div(["x", "y"], t, a), ceil_div(["x", "y"], t, a)
    for x, y in itertools.product(BOX, BOX):
        v = 2 * x - y + 1
        assert fl(x, y) == v // a
        assert ce(x, y) == -((-v) // a)
    assert fl.check_partition() is None


def test_floor_skips_unreachable_residues():
    f = floor_div(["x"], Term.var("x", 2), 4)
    assert len(f.pieces) == 2


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_max_min_pointwise(seed):
    rng = random.Random(seed)
    f, g = random_pw(rng, ["x", "y"]), random_pw(rng, ["x", "y"])
    hi, lo = pw_max(f, g), pw_min(f, g)
    for x, y in itertools.product(range(-6, 7), repeat=2):
        assert hi(x, y) == max(f(x, y), g(x, y))
        assert lo(x, y) == min(f(x, y), g(x, y))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_numpy_eval_matches_scalar(seed):
    rng = random.Random(seed)
    f = random_pw(rng, ["x", "y"])
    xs, ys = np.meshgrid(np.arange(-8, 9), np.arange(-8, 9), indexing="ij")
    vals, ok = f.numpy_eval([xs, ys])
    for i, j in itertools.product(range(xs.shape[0]), range(xs.shape[1])):
        want = f(int(xs[i, j]), int(ys[i, j]))
        assert bool(ok[i, j]) == (want is not None)
        if want is not None:
            assert int(vals[i, j]) == want


def test_describe_round_trip():
    f = pw_max(PWLinearFn.parse("x"), floor_div(["x"], parse_term("3*x + 1"), 2))
    g = PWLinearFn.from_description(f.describe())
    assert all(f(x) == g(x) for x in BOX)


def test_compare_views():
    f = floor_div(["x"], parse_term("x"), 3)
    from presburger.formula import eval_formula
    le = f.compare("le", Term.var("t"))
    for x, t in itertools.product(BOX, BOX):
        assert eval_formula(le, {"x": x, "t": t}) == (x // 3 <= t)
