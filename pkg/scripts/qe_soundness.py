"""Random quantified formulas: Cooper elimination against z3 on a box.

Needs the ``test`` extra (z3-solver); the oracle lives in ``tests/oracles.py``.
"""

from __future__ import annotations

import random
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from _config import load_config

from presburger.formula import format_formula, free_vars
from presburger.qe import cooper_eliminate, qf_size

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from generators import random_quantified  # noqa: E402
from oracles import z3_disagreements  # noqa: E402


@dataclass
class Config:
    """QE soundness sweep."""
    count: int = 100
    max_quantifiers: int = 3
    box: int = 40
    seed: int = 0


def main(argv=None):
    cfg = load_config(Config, argv)
    rng = random.Random(cfg.seed)
    bad, sizes = 0, []
    start = time.perf_counter()
    for i in range(cfg.count):
        f = random_quantified(rng, free=("x", "y")[:rng.randint(1, 2)],
                              quantifiers=rng.randint(1, cfg.max_quantifiers))
        g = cooper_eliminate(f)
        sizes.append(qf_size(g))
        diff = z3_disagreements(f, g, cfg.box, sorted(free_vars(f)))
        if diff:
            bad += 1
            print(f"mismatch #{i} at {diff}: {format_formula(f)}")
    print(f"{cfg.count - bad}/{cfg.count} agree on [-{cfg.box},{cfg.box}]^fv; "
          f"max output size {max(sizes)}; {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
