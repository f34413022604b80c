from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from presburger.heights import (
    RationalTuple, classify_s1_s2, height_by_places, height_rational, subspace_count_bound,
)


def rt(*xs):
    return RationalTuple.from_fractions(Fraction(x) for x in xs)


@pytest.mark.parametrize("xs, H", [(("1/2",), 2), (("3/4", "5/4"), 5), ((2, 3), 3), ((0,), 1)])
def test_height_examples(xs, H):
    x = rt(*xs)
    assert height_rational(x).H == H
    assert height_by_places(x).H == H


def test_log_height():
    h = height_rational(rt("3/4", "5/4"))
    assert math.isclose(h.logH, math.log(5), rel_tol=0, abs_tol=1e-15)


def test_canonical_form():
    x = RationalTuple((6, 10), 8)
    assert x.numerators == (3, 5) and x.denominator == 4
    y = RationalTuple((3, -5), -4)
    assert y.denominator == 4 and y.numerators == (-3, 5)
    with pytest.raises(ZeroDivisionError):
        RationalTuple((1,), 0)


def test_parse():
    assert RationalTuple.parse("3/4,5/4") == RationalTuple((3, 5), 4)


@pytest.mark.parametrize("n, r, d, value", [(1, 1, 1, 2**35), (2, 2, 1, 2**134), (1, 0, 2, 2**32)])
def test_subspace_count_bound(n, r, d, value):
    assert subspace_count_bound(n, r, d) == value


def test_classify_examples():
    assert classify_s1_s2((32, 27), 5, (1, -1)) == "S2"
    assert classify_s1_s2((2**200, 1), 5, (1, 1)) == "S1"
    assert classify_s1_s2((1, 1), 1, (1, 1)) == "S1"
    with pytest.raises(ValueError):
        classify_s1_s2((1,), 0, (1,))


def test_classify_boundary_is_exact():
    # H(k/c) = 2 and 4n^2 = 4, so the threshold is exactly 16
    assert classify_s1_s2((16,), 2, (1,)) == "S1"
    assert classify_s1_s2((15,), 2, (1,)) == "S2"


canonical = st.tuples(
    st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=5), st.integers(1, 10**6),
)


@settings(max_examples=300, deadline=None)
@given(canonical)
def test_places_equal_max_formula(data):
    nums, b = data
    x = RationalTuple(tuple(nums), b)
    assert height_by_places(x).H == height_rational(x).H


@settings(max_examples=200, deadline=None)
@given(canonical, st.data())
def test_sign_and_permutation_invariance(data, draw):
    nums, b = data
    signs = draw.draw(st.lists(st.sampled_from([-1, 1]), min_size=len(nums), max_size=len(nums)))
    perm = draw.draw(st.permutations(range(len(nums))))
    x = RationalTuple(tuple(nums), b)
    y = RationalTuple(tuple(signs[i] * nums[perm[i]] for i in range(len(nums))), b)
    assert height_rational(x).H == height_rational(y).H


@settings(max_examples=200, deadline=None)
@given(canonical, st.integers(1, 1000))
def test_unreduced_representation(data, k):
    nums, b = data
    assert height_rational(RationalTuple(tuple(k * a for a in nums), k * b)) == \
        height_rational(RationalTuple(tuple(nums), b))


@given(st.integers(1, 3), st.integers(0, 3), st.integers(1, 3))
def test_bound_monotone(n, r, d):
    v = subspace_count_bound(n, r, d)
    assert subspace_count_bound(n + 1, r, d) >= v
    assert subspace_count_bound(n, r + 1, d) >= v
    assert subspace_count_bound(n, r, d + 1) >= v
