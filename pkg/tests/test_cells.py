from __future__ import annotations

import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from presburger.cells import (
    CellArityError, CellUnion, FamilyExpr, FamilyTooLargeError, FiberFamily, PresburgerSet,
    WeakCell, build_covering_h, crt, decompose_to_weak_cells, diamond_cells, empty_cell,
    eval_family_expr, eval_family_mask, family_boolean, project_s, psi_formula,
    technical_union_decompose, window_grids,
)
from presburger.formula import FALSE, eval_formula, parse_formula
from presburger.pwlinear import Piece, PWLinearFn

from generators import random_cell, random_family, random_qf
from oracles import diamond_predicate

pw = PWLinearFn.parse
U_LE_X = PresburgerSet(("u", "x"), parse_formula("u <= x"))


def ge5():
    return FamilyExpr(1, U_LE_X, FiberFamily.of(1, [[2, 5]]))


def points(e, window):
    return sorted(p[0] for p in eval_family_expr(e, window))


# ---------------------------------------------------------------------------
# diamond


def example_pair():
    A = WeakCell(("x",), "t", parse_formula("0 <= x & x <= 5"), pw("x", ["x"]), None, 1, 2)
    B = WeakCell(("y",), "t", parse_formula("0 <= y & y <= 5"), None, pw("y + 10", ["y"]), 2, 3)
    return A, B


def test_crt():
    assert crt(1, 2, 2, 3) == (5, 6)
    assert crt(0, 2, 1, 2) is None
    assert crt(1, 4, 3, 6) == (9, 12)


def test_diamond_example():
    A, B = example_pair()
    C = diamond_cells(A, B, 1)
    assert (C.k, C.N) == (5, 6)
    assert C.cell_type == "iv"
    assert C.contains((0, 0, 5))
    for x, y, t in itertools.product(range(-2, 9), repeat=3):
        assert C.contains((x, y, t)) == (A.contains((x, t)) and B.contains((y, t)))


def test_diamond_incompatible_congruences_is_empty():
    C = diamond_cells(WeakCell(("x",), "t", k=0, N=2), WeakCell(("y",), "t", k=1, N=2), 1)
    assert C == empty_cell(C.variables, C.t)
    assert C.base == FALSE and (C.k, C.N) == (0, 1)


def test_diamond_arity_mismatch():
    A, _ = example_pair()
    with pytest.raises(CellArityError):
        diamond_cells(A, WeakCell(("y", "z"), "t"), 1)


def test_cell_invariants():
    assert WeakCell(("x",), "t", k=5, N=2).k == 1
    with pytest.raises(ValueError):
        WeakCell(("x",), "t", N=0)
    with pytest.raises(CellArityError):
        WeakCell(("x",), "t", lower=pw("t"))
    with pytest.raises(CellArityError):
        WeakCell(("x",), "t", base=parse_formula("y > 0"))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_diamond_random_pointwise(seed):
    rng = random.Random(seed)
    m, n = rng.randint(1, 2), rng.randint(0, 1)
    a = random_cell(rng, [f"u{i}" for i in range(m)] + [f"z{i}" for i in range(n)])
    b = random_cell(rng, [f"v{i}" for i in range(m)] + [f"z{i}" for i in range(n)])
    C = diamond_cells(a, b, m)
    grids = window_grids((-6, 6), len(C.coords))
    x, y, rest = grids[:m], grids[m:2 * m], grids[2 * m:]
    want = a.mask(x + rest) & b.mask(y + rest)
    assert np.array_equal(C.mask(grids), want)
    # and against the formula-level definition
    f, names = diamond_predicate(a, b, m)
    sample = [tuple(int(g.flat[i]) for g in grids) for i in range(0, want.size, max(1, want.size // 40))]
    for p in sample:
        assert eval_formula(f, dict(zip(names, p))) == C.contains(p)


# ---------------------------------------------------------------------------
# evaluation and Boolean operations


def test_eval_examples():
    assert points(ge5(), (0, 10)) == list(range(5, 11))
    assert points(FamilyExpr(1, U_LE_X, FiberFamily.of(1, [[2], [7]])), (0, 10)) == list(range(2, 11))
    assert points(FamilyExpr(1, U_LE_X, FiberFamily(1)), (0, 10)) == []


def test_complement_and_intersect():
    c = family_boolean("complement", ge5())
    assert points(c, (0, 10)) == [0, 1, 2, 3, 4]
    assert points(family_boolean("complement", c), (0, 10)) == list(range(5, 11))
    ge2 = FamilyExpr(1, U_LE_X, FiberFamily.of(1, [[2]]))
    assert points(family_boolean("intersect", ge5(), ge2), (0, 10)) == list(range(5, 11))
    empty = FamilyExpr(1, U_LE_X, FiberFamily(1))
    assert points(family_boolean("complement", empty), (0, 10)) == list(range(11))


def test_complement_product_cap():
    fam = FiberFamily.of(1, [list(range(10))] * 4)
    with pytest.raises(FamilyTooLargeError) as info:
        family_boolean("complement", FamilyExpr(1, U_LE_X, fam), product_cap=1000)
    assert info.value.size == 10**4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_boolean_random(seed):
    rng = random.Random(seed)
    k1 = PresburgerSet(("u", "x"), random_qf(rng, ["u", "x"], depth=1, max_coeff=2))
    k2 = PresburgerSet(("u", "x"), random_qf(rng, ["u", "x"], depth=1, max_coeff=2))
    e1 = FamilyExpr(1, k1, random_family(rng, 1, max_points=3, allow_empty=True))
    e2 = FamilyExpr(1, k2, random_family(rng, 1, max_points=3, allow_empty=True))
    w = (-8, 8)
    full = {(x,) for x in range(w[0], w[1] + 1)}
    s1, s2 = eval_family_expr(e1, w), eval_family_expr(e2, w)
    assert eval_family_expr(family_boolean("complement", e1), w) == full - s1
    assert eval_family_expr(family_boolean("intersect", e1, e2), w) == s1 & s2


# ---------------------------------------------------------------------------
# technical union


def test_technical_union_empty_index_set():
    A, _ = example_pair()
    cells = [A.rename({"x": "u"}), A.rename({"x": "u"})]
    tu = technical_union_decompose(cells, FiberFamily(1))
    assert all(not eval_family_expr(g, (-10, 10)) for g in tu.parts)


def test_technical_union_singleton_has_no_mixed_part():
    cells = [WeakCell(("u",), "t", lower=pw("u", ["u"])), WeakCell(("u",), "t", upper=pw("u + 3", ["u"]))]
    tu = technical_union_decompose(cells, FiberFamily.of(1, [[1]]))
    assert not eval_family_expr(tu.mixed, (-10, 10))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_technical_union_identity(seed):
    rng = random.Random(seed)
    m, k = 1, rng.randint(1, 2)
    cells = [random_cell(rng, ["u"]) for _ in range(k + 1)]
    fam = random_family(rng, m, max_points=3, pool=(1, 2, 4, -1, 3))
    w = (-10, 10)
    lhs = eval_family_expr(FamilyExpr(m, CellUnion(tuple(cells)), fam), w)
    brute = {(t,) for t in range(w[0], w[1] + 1)
             if any(all(any(c.contains(u + (t,)) for c in cells) for u in pts) for _, pts in fam)}
    assert lhs == brute == technical_union_decompose(cells, fam).evaluate(w)


# ---------------------------------------------------------------------------
# decomposition


def test_decompose_already_a_cell():
    out = decompose_to_weak_cells("x >= 0 & x <= y & y <= 2*x & y === 0 mod 2", ["x", "y"])
    assert len(out) == 1
    c = out[0]
    assert c.cell_type == "iv" and (c.k, c.N) == (0, 2)
    for x in range(-5, 20):
        assert eval_formula(c.base, {"x": x}) == (x >= 0)
        if x >= 0:
            assert c.lower(x) == x and c.upper(x) == 2 * x


def test_decompose_two_rays():
    out = decompose_to_weak_cells("y >= 0 | y < -5", ["y"])
    assert sorted(c.cell_type for c in out) == ["ii", "iii"]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_decompose_partitions(seed):
    rng = random.Random(seed)
    f = random_qf(rng, ["x", "y", "z"], depth=2, max_coeff=3, max_modulus=4)
    cells = decompose_to_weak_cells(f, ["x", "y", "z"])
    grids = window_grids((-10, 10), 3)
    want = PresburgerSet(("x", "y", "z"), f).mask(grids)
    cover = sum(c.mask(grids).astype(int) for c in cells) if cells else np.zeros(want.shape, int)
    assert cover.max(initial=0) <= 1
    assert np.array_equal(cover == 1, want)


# ---------------------------------------------------------------------------
# projection


def test_project_type_ii_is_everything():
    cell = WeakCell(("u", "x"), "t", lower=pw("u + x", ["u", "x"]))
    p = project_s(FamilyExpr(1, cell, FiberFamily.of(1, [[1, 2]])))
    assert points(p, (-5, 10)) == list(range(-5, 11))


@pytest.mark.parametrize("N, start", [(1, 3), (2, 4)])
def test_project_type_iv(N, start):
    cell = WeakCell(("u", "x"), "t", lower=pw("u", ["u", "x"]), upper=pw("x", ["u", "x"]), k=0, N=N)
    p = project_s(FamilyExpr(1, cell, FiberFamily.of(1, [[1, 3]])))
    assert points(p, (-5, 10)) == list(range(start, 11))


@pytest.mark.parametrize("a, b, k, N", [(3, 3, 0, 2), (3, 4, 0, 2), (-4, 1, 2, 3), (5, 9, 1, 5)])
def test_psi(a, b, k, N):
    from presburger.formula import Term
    f = psi_formula(Piece(parse_formula("0 = 0"), Term.var("a")),
                    Piece(parse_formula("0 = 0"), Term.var("b")), k, N)
    want = any(y % N == k for y in range(a, b + 1))
    assert eval_formula(f, {"a": a, "b": b}) == want


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["i", "ii", "iii", "iv"]))
def test_projection_random(seed, kind):
    rng = random.Random(seed)
    cell = random_cell(rng, ["u", "x"], kind=kind)
    fam = random_family(rng, 1, allow_empty=True, pool=(1, 2, 4, 8))
    e = FamilyExpr(1, cell, fam)
    w = (-6, 6)
    got = eval_family_expr(project_s(e), w)
    grids = window_grids(w, 1)
    vals = [0]
    for _, pts in fam:
        for u in pts:
            for fn in (cell.lower, cell.upper):
                if fn is not None:
                    v, ok = fn.numpy_eval([np.int64(u[0])] + grids)
                    if np.asarray(ok).any():
                        v = np.broadcast_to(v, ok.shape)[ok]
                        vals += [int(v.min()), int(v.max())]
    hit = np.zeros(grids[0].shape, bool)
    for t in range(min(vals) - cell.N, max(vals) + cell.N + 1):
        hit |= eval_family_mask(e, grids + [np.full(grids[0].shape, t)])
    assert got == {(int(x),) for x in grids[0][hit]}


# ---------------------------------------------------------------------------
# covering function


def test_covering_h_example():
    h = build_covering_h(pw("u", ["u"]), 2, 1, (1, 2))
    assert h.arity == 2
    for u in range(-5, 6):
        assert (h(u, 1), h(u, 2), h(u, 4), h(u, 7)) == (u, u + 1, 0, 0)


def test_covering_h_rejects_duplicates():
    with pytest.raises(ValueError):
        build_covering_h(pw("u", ["u"]), 2, 1, (1, 1))


def test_covering_contains_small_set():
    # A = {t : some u in P has u <= t <= u + 1}, P inside 2^N
    P = [1, 4, 16]
    A = {t for t in range(0, 65) if any(u <= t <= u + 1 for u in P)}
    h = build_covering_h(pw("u", ["u"]), 2, 1, (1, 2))
    E = [2 ** i for i in range(7)]
    image = {h(u, e) for u in E for e in E}
    assert A <= image


def test_covering_empty_set_vacuous():
    h = build_covering_h(pw("u", ["u"]), 1, 1, (1,))
    assert set() <= {h(u, 1) for u in (1, 2, 4)}
