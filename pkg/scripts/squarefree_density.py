"""Empirical density of the squarefree integers over growing windows."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from _config import load_config

from presburger.sparseness import Membership, empirical_density


@dataclass
class Config:
    """Squarefree counts on [-h, h]."""
    windows: tuple = (10**3, 10**4, 10**5, 10**6, 10**7)
    workers: int = 1


def main(argv=None):
    cfg = load_config(Config, argv)
    start = time.perf_counter()
    est = empirical_density(Membership.squarefree(), cfg.windows, workers=cfg.workers)
    target = 6 / math.pi**2
    print("h,count,ratio,error")
    for h, c, r in zip(est.windows, est.counts, est.ratios):
        print(f"{h},{c},{float(r):.7f},{float(r) - target:+.2e}")
    print(f"# {time.perf_counter() - start:.2f}s")


if __name__ == "__main__":
    main()
