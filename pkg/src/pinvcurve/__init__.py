"""Maximally smooth discount and forward curves from market quotes.

The smoothest curve through linear pricing constraints ``C g(x) = p`` has a
closed form in a reproducing-kernel Hilbert space.  Submodules cover the
kernel, instrument cashflows, the curve solver, sensitivities and hedging,
bid-ask quote optimization, a discrete variant, a staged multi-curve build
and a traditional bootstrap for comparison.
"""

from .curve_solver import DiscountCurve, KernelExpansion, solve, solve_fixed_short_rate
from .errors import (
    ArbitrageError,
    CurveError,
    DomainError,
    IllConditionedError,
    InfeasibleError,
    OptimizationError,
    QuoteParseError,
    RankDeficientError,
)
from .instruments import PricingSystem, assemble, read_quotes

__version__ = "0.1.0"

__all__ = [
    "ArbitrageError",
    "CurveError",
    "DiscountCurve",
    "DomainError",
    "IllConditionedError",
    "InfeasibleError",
    "KernelExpansion",
    "OptimizationError",
    "PricingSystem",
    "QuoteParseError",
    "RankDeficientError",
    "assemble",
    "read_quotes",
    "solve",
    "solve_fixed_short_rate",
]
