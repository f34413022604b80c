"""Share of [-h, h] hit by f(E^M) for E a union of powers."""

from __future__ import annotations

from dataclasses import dataclass

from _config import load_config

from presburger.powers import PowerBasis, image_density_experiment
from presburger.pwlinear import PWLinearFn


@dataclass
class Config:
    """Image densities of piecewise-affine maps on sets of powers."""
    bases: tuple = (2, 3)
    functions: tuple = ("x - y", "x + y", "x + 2*y - z")
    windows: tuple = (10**2, 10**3, 10**4, 10**5, 10**6)
    value_cap: int | None = None


def main(argv=None):
    cfg = load_config(Config, argv)
    basis = PowerBasis(tuple(cfg.bases))
    print("f,h,count,ratio,possibly_incomplete")
    for text in cfg.functions:
        est = image_density_experiment(basis, PWLinearFn.parse(text), cfg.windows,
                                       value_cap=cfg.value_cap)
        for h, c, r in zip(est.windows, est.counts, est.ratios):
            print(f"\"{text}\",{h},{c},{float(r):.6f},{est.possibly_incomplete}")


if __name__ == "__main__":
    main()
