"""Multiplicative and logarithmic heights of rational points.

Only the field of rationals is supported.  Its places are the primes and
the archimedean absolute value; for a tuple written over a common
denominator in lowest terms the product over places collapses to
``max(|a_1|, ..., |a_n|, b)``, which :func:`height_by_places` recomputes
the long way as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

from sympy import factorint

__all__ = [
    "RationalTuple", "HeightValue", "height_rational", "height_by_places",
    "subspace_count_bound", "classify_s1_s2",
]


@dataclass(frozen=True)
class RationalTuple:
    """``(a_1/b, ..., a_n/b)`` with ``b > 0`` and ``gcd(a_1, ..., a_n, b) = 1``.

    The constructor reduces whatever it is given, so any integer vector with
    any nonzero common denominator is accepted.
    """

    numerators: tuple[int, ...]
    denominator: int = 1

    def __post_init__(self):
        nums = tuple(int(a) for a in self.numerators)
        b = int(self.denominator)
        if b == 0:
            raise ZeroDivisionError("denominator must be nonzero")
        if b < 0:
            nums, b = tuple(-a for a in nums), -b
        g = reduce(math.gcd, nums, b)
        object.__setattr__(self, "numerators", tuple(a // g for a in nums))
        object.__setattr__(self, "denominator", b // g)

    @classmethod
    def from_fractions(cls, xs: Iterable[Fraction | int | str]) -> RationalTuple:
        fr = [Fraction(x) for x in xs]
        b = reduce(lambda acc, q: acc * q.denominator // math.gcd(acc, q.denominator), fr, 1)
        return cls(tuple(q.numerator * (b // q.denominator) for q in fr), b)

    @classmethod
    def parse(cls, text: str) -> RationalTuple:
        """``"3/4,5/4"`` style input."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty tuple")
        return cls.from_fractions(parts)

    def as_fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(a, self.denominator) for a in self.numerators)

    def __len__(self) -> int:
        return len(self.numerators)


@dataclass(frozen=True)
class HeightValue:
    H: int
    logH: float

    @classmethod
    def of(cls, H: int) -> HeightValue:
        if H < 1:
            raise ValueError("height is at least 1")
        return cls(H, math.log(H))


def height_rational(x: RationalTuple) -> HeightValue:
    return HeightValue.of(max([abs(a) for a in x.numerators] + [x.denominator]))


def _p_adic_abs(q: Fraction, p: int) -> Fraction:
    """``|q|_p = p^(-v_p(q))`` with ``|0|_p = 0``."""
    if q == 0:
        return Fraction(0)
    v = 0
    num, den = q.numerator, q.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return Fraction(1, p ** v) if v >= 0 else Fraction(p ** (-v))


def height_by_places(x: RationalTuple) -> HeightValue:
    """Product over the places of Q of ``max(1, |x_1|_v, ..., |x_n|_v)``.

    Only primes dividing the denominator can contribute a factor above 1,
    so those plus the archimedean place are enumerated.
    """
    coords = x.as_fractions()
    total = Fraction(1)
    for p in sorted(factorint(x.denominator)):
        total *= max([Fraction(1)] + [_p_adic_abs(q, p) for q in coords])
    total *= max([Fraction(1)] + [abs(q) for q in coords])
    if total.denominator != 1:
        raise ArithmeticError(f"height product is not an integer: {total}")
    return HeightValue.of(total.numerator)


def subspace_count_bound(n: int, r: int, d: int) -> int:
    """``2^(30 n^2) (32 n^2)^r d^(3r + 2n)``, exact."""
    if n < 1 or r < 0 or d < 1:
        raise ValueError("need n >= 1, r >= 0, d >= 1")
    return 2 ** (30 * n * n) * (32 * n * n) ** r * d ** (3 * r + 2 * n)


def classify_s1_s2(x: Sequence[int], c: int, k: Sequence[Fraction | int]) -> str:
    """``"S1"`` iff ``H(k_1/c, ..., k_n/c)^(4n^2) <= H(x)``, else ``"S2"``.

    The comparison is done on exact integers, never on logarithms.
    """
    if c == 0:
        raise ValueError("c must be nonzero")
    if len(x) != len(k):
        raise ValueError("x and k must have the same length")
    n = len(x)
    hk = height_rational(RationalTuple.from_fractions(Fraction(ki) / c for ki in k)).H
    hx = height_rational(RationalTuple(tuple(x), 1)).H
    return "S1" if hk ** (4 * n * n) <= hx else "S2"
