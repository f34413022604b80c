"""Longest runs along progressions N*i + k for several sparse sets."""

from __future__ import annotations

from dataclasses import dataclass

from _config import load_config

from presburger.sparseness import ap_run_analysis, parse_set_spec


@dataclass
class Config:
    """AP-run table for each set spec."""
    sets: tuple = ("powers:2,3", "powers:2", "squarefree")
    h: int = 10**6
    n_max: int = 6


def main(argv=None):
    cfg = load_config(Config, argv)
    print("set,N,k,max_run,start,censored")
    for spec in cfg.sets:
        rep = ap_run_analysis(parse_set_spec(spec), cfg.h, cfg.n_max)
        for (N, k), run in sorted(rep.runs.items()):
            print(f"{spec},{N},{k},{run.length},{run.start},{run.censored}")


if __name__ == "__main__":
    main()
