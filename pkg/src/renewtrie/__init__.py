"""Renewal-theory laboratory for random tries and variable-to-fixed codes.

Memoryless binary sources, tries (plain, b-, Patricia), Khodak and Tunstall
dictionaries, the two-boundary stopped walk, closed-form asymptotic
predictors for all of them, and a seeded Monte Carlo harness comparing the
two.
"""

from renewtrie.source import (
    ArithmeticClass,
    HintMismatchError,
    SourceParams,
    StringHandle,
    bit_at,
    new_source,
    prefix_log_probability,
    prefix_probability,
    sample_string,
    solve_arithmetic_p,
)

__version__ = "0.1.0"

__all__ = [
    "ArithmeticClass",
    "HintMismatchError",
    "SourceParams",
    "StringHandle",
    "bit_at",
    "new_source",
    "prefix_log_probability",
    "prefix_probability",
    "sample_string",
    "solve_arithmetic_p",
]
