"""Windowed density estimates ``|A ∩ [-h, h]| / (2h + 1)``."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = ["DensityEstimate"]


@dataclass(frozen=True)
class DensityEstimate:
    """Exact counts for an increasing list of windows.

    ``upper``/``lower`` summarise the tail, taken as the last half of the
    windows (rounded up); they are finite-window stand-ins for the limsup
    and liminf, nothing more.
    """

    windows: tuple[int, ...]
    counts: tuple[int, ...]
    possibly_incomplete: bool = False

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(int(h) for h in self.windows))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.windows) != len(self.counts):
            raise ValueError("windows and counts differ in length")
        if any(a >= b for a, b in zip(self.windows, self.windows[1:])):
            raise ValueError("windows must be strictly increasing")
        if self.windows and self.windows[0] < 0:
            raise ValueError("windows must be nonnegative")
        if any(a > b for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("counts must be nondecreasing")
        for h, c in zip(self.windows, self.counts):
            if not 0 <= c <= 2 * h + 1:
                raise ValueError(f"count {c} impossible for window {h}")

    @property
    def ratios(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, 2 * h + 1) for h, c in zip(self.windows, self.counts))

    def _tail(self) -> tuple[Fraction, ...]:
        r = self.ratios
        return r[len(r) // 2:]

    @property
    def upper(self) -> Fraction:
        return max(self._tail())

    @property
    def lower(self) -> Fraction:
        return min(self._tail())

    def rows(self) -> list[dict]:
        return [
            {"h": h, "count": c, "ratio": float(r), "ratio_exact": f"{r.numerator}/{r.denominator}"}
            for h, c, r in zip(self.windows, self.counts, self.ratios)
        ]
