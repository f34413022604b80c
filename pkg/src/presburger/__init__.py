"""Presburger arithmetic over the integers: formulas, quantifier elimination,
exact and empirical densities, heights, power-sum equations and weak cells."""

from __future__ import annotations

from .formula import Formula, Term, eval_formula, parse_formula, parse_term
from .qe import cooper_eliminate, decide_sentence

__all__ = [
    "Formula",
    "Term",
    "cooper_eliminate",
    "decide_sentence",
    "eval_formula",
    "parse_formula",
    "parse_term",
]
__version__ = "0.1.0"
