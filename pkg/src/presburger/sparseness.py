"""Finite-window evidence about how sparse a set of integers is.

Sets are given by a :class:`Membership` source with a vectorised ``mask``:
a semilinear set, a set of powers, an explicit list, the squarefree
integers, a formula, or (slowly) an arbitrary Python predicate.  All counts
are exact; limits are never asserted, only reported per window together
with flags saying when a run reaches the window edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import qe
from .density import DensityEstimate
from .formula import Formula, compile_numpy, free_vars, is_quantifier_free, parse_formula
from .parallel import pmap
from .powers import PowerBasis
from .semilinear import SemilinearSet1

__all__ = [
    "Membership", "squarefree_up_to", "is_squarefree", "empirical_density",
    "ap_run_analysis", "piecewise_syndetic_window", "APRunReport", "RunInfo",
    "SyndeticReport", "parse_set_spec",
]

CHUNK = 1 << 20


@dataclass(frozen=True)
class Membership:
    """A set of integers with a vectorised membership test."""

    name: str
    mask: Callable[[np.ndarray], np.ndarray]

    def __contains__(self, x: int) -> bool:
        return bool(self.mask(np.array([x], dtype=np.int64))[0])

    @classmethod
    def semilinear(cls, s: SemilinearSet1) -> Membership:
        return cls(f"semilinear(P={s.period})", s.mask)

    @classmethod
    def powers(cls, basis: PowerBasis) -> Membership:
        return cls("powers:" + ",".join(map(str, basis.bases)), basis.mask)

    @classmethod
    def explicit(cls, values: Iterable[int]) -> Membership:
        arr = np.array(sorted(set(int(v) for v in values)), dtype=np.int64)
        return cls(f"list({len(arr)})", lambda xs: np.isin(xs, arr))

    @classmethod
    def squarefree(cls) -> Membership:
        return cls("squarefree", _squarefree_mask)

    @classmethod
    def formula(cls, f: Formula | str) -> Membership:
        if isinstance(f, str):
            f = parse_formula(f)
        if not is_quantifier_free(f):
            f = qe.cooper_eliminate(f)
        fv = sorted(free_vars(f))
        if len(fv) > 1:
            raise ValueError(f"expected one free variable, found {', '.join(fv)}")
        pred = compile_numpy(f, fv or ["x"])
        return cls("formula", lambda xs: np.broadcast_to(pred([xs]), np.shape(xs)))

    @classmethod
    def predicate(cls, fn: Callable[[int], bool], name: str = "predicate") -> Membership:
        return cls(name, lambda xs: np.fromiter((bool(fn(int(x))) for x in np.ravel(xs)),
                                                dtype=bool, count=np.size(xs)).reshape(np.shape(xs)))

    @classmethod
    def empty(cls) -> Membership:
        return cls("empty", lambda xs: np.zeros(np.shape(xs), dtype=bool))


def parse_set_spec(spec: str) -> Membership:
    """``powers:2,3`` | ``squarefree`` | ``formula:<qf in one variable>`` |
    ``list:1,2,3`` | ``empty``."""
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "powers":
        return Membership.powers(PowerBasis(tuple(int(a) for a in arg.split(","))))
    if kind == "squarefree":
        return Membership.squarefree()
    if kind == "formula":
        return Membership.formula(arg)
    if kind == "list":
        return Membership.explicit(int(v) for v in arg.split(",") if v.strip())
    if kind == "empty":
        return Membership.empty()
    raise ValueError(f"unknown set spec {spec!r}")


# ---------------------------------------------------------------------------
# squarefree integers

def squarefree_up_to(limit: int) -> np.ndarray:
    """Boolean array ``s`` of length ``limit + 1`` with ``s[x]`` true iff
    ``x >= 1`` is squarefree (``s[0]`` is false)."""
    if limit < 1:
        raise ValueError("limit must be at least 1")
    s = np.ones(limit + 1, dtype=bool)
    s[0] = False
    for d in range(2, math.isqrt(limit) + 1):
        s[d * d::d * d] = False
    return s


def is_squarefree(x: int) -> bool:
    x = abs(x)
    if x == 0:
        return False
    d = 2
    while d * d <= x:
        if x % (d * d) == 0:
            return False
        d += 1
    return True


def _squarefree_mask(xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs)
    a = np.abs(xs)
    if a.size == 0:
        return np.zeros(xs.shape, dtype=bool)
    lo, hi = int(a.min()), int(a.max())
    if hi == 0:
        return np.zeros(xs.shape, dtype=bool)
    if hi - lo <= 4 * CHUNK:
        # segmented sieve over [lo, hi]
        seg = np.ones(hi - lo + 1, dtype=bool)
        for d in range(2, math.isqrt(hi) + 1):
            q = d * d
            start = (-lo) % q
            seg[start::q] = False
        out = seg[a - lo]
    else:
        out = squarefree_up_to(hi)[a]
    return out & (a != 0)


# ---------------------------------------------------------------------------
# densities

def _window_counts(member: Membership, lo: int, hi: int, windows: Sequence[int]) -> list[int]:
    """Per-window counts contributed by the nonnegative values ``[lo, hi)``
    and their negatives ``(-hi, -lo]`` (0 counted once)."""
    xs = np.arange(lo, hi, dtype=np.int64)
    pos = member.mask(xs)
    neg = member.mask(-xs)
    neg = neg & (xs != 0)
    cp = np.concatenate([[0], np.cumsum(pos)])
    cn = np.concatenate([[0], np.cumsum(neg)])
    out = []
    for h in windows:
        k = max(0, min(hi, h + 1) - lo)
        out.append(int(cp[k] + cn[k]))
    return out


def empirical_density(member: Membership | Callable[[int], bool], windows: Sequence[int],
                      workers: int | None = None) -> DensityEstimate:
    """Exact ``|A ∩ [-h, h]|`` for each window."""
    if not isinstance(member, Membership):
        member = Membership.predicate(member)
    windows = sorted(int(h) for h in windows)
    H = windows[-1]
    bounds = [(s, min(s + CHUNK, H + 1)) for s in range(0, H + 1, CHUNK)]
    parts = pmap(lambda b: _window_counts(member, b[0], b[1], windows), bounds, workers)
    counts = [sum(p[i] for p in parts) for i in range(len(windows))]
    return DensityEstimate(tuple(windows), tuple(counts))


# ---------------------------------------------------------------------------
# runs along arithmetic progressions

@dataclass(frozen=True)
class RunInfo:
    length: int
    start: int | None  # first term of the first longest run
    censored: bool


@dataclass(frozen=True)
class APRunReport:
    h: int
    runs: dict  # (N, k) -> RunInfo

    def max_run(self, N: int | None = None) -> int:
        return max((r.length for (n, _), r in self.runs.items() if N is None or n == N),
                   default=0)

    def any_censored(self) -> bool:
        return any(r.censored for r in self.runs.values() if r.length)

    def rows(self) -> list[dict]:
        return [{"N": n, "k": k, "max_run": r.length, "start": r.start, "censored": r.censored}
                for (n, k), r in sorted(self.runs.items())]


def _longest_true_run(bits: np.ndarray) -> tuple[int, int | None, bool]:
    """(length, index of first longest run, touches either end)."""
    if bits.size == 0 or not bits.any():
        return 0, None, False
    padded = np.concatenate([[False], bits, [False]]).astype(np.int8)
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    lengths = ends - starts
    best = int(lengths.max())
    which = np.flatnonzero(lengths == best)
    touches = bool(starts[which[0]] == 0 or ends[which[-1]] == bits.size
                   or np.any(starts[which] == 0) or np.any(ends[which] == bits.size))
    return best, int(starts[which[0]]), touches


def ap_run_analysis(member: Membership | Callable[[int], bool], h: int, n_max: int) -> APRunReport:
    """For each ``1 <= N <= n_max`` and ``0 <= k < N``, the longest run of
    consecutive terms of ``N i + k`` lying in ``A ∩ [-h, h]``.

    A run is censored when a longest run starts or ends at the window edge,
    so it might continue outside.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if not isinstance(member, Membership):
        member = Membership.predicate(member)
    xs = np.arange(-h, h + 1, dtype=np.int64)
    mask = member.mask(xs)
    runs = {}
    for N in range(1, n_max + 1):
        for k in range(N):
            i0 = (k + h) % N
            length, start, touches = _longest_true_run(mask[i0::N])
            runs[(N, k)] = RunInfo(length, None if start is None else int(xs[i0 + start * N]),
                                   touches)
    return APRunReport(h, runs)


@dataclass(frozen=True)
class SyndeticReport:
    h: int
    b: int
    length: int
    interval: tuple[int, int] | None
    censored: bool


def piecewise_syndetic_window(member: Membership | Callable[[int], bool], h: int,
                              b: int) -> SyndeticReport:
    """Longest interval ``I ⊆ [-h, h]`` inside ``A + [0, b]``: every ``x`` in
    ``I`` has some ``a`` in ``A`` with ``x - b <= a <= x``.

    Membership is evaluated on ``[-h - b, h]`` so points near the left edge
    are judged exactly.
    """
    if b < 0:
        raise ValueError("b must be nonnegative")
    if not isinstance(member, Membership):
        member = Membership.predicate(member)
    xs = np.arange(-h - b, h + 1, dtype=np.int64)
    m = member.mask(xs).astype(np.int64)
    c = np.concatenate([[0], np.cumsum(m)])
    # covered[x] iff A meets [x - b, x]; x = -h .. h sits at offset b .. end
    idx = np.arange(b, len(xs))
    covered = (c[idx + 1] - c[idx - b]) > 0
    length, start, touches = _longest_true_run(covered)
    if length == 0:
        return SyndeticReport(h, b, 0, None, False)
    lo = -h + start
    return SyndeticReport(h, b, length, (lo, lo + length - 1), touches)
