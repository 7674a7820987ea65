"""Optimal excess-of-loss reinsurance and dividend payment under a solvency cap.

Subpackages:
    model     -- constants, premium rate, minimal retention, assumption checks
    hjb       -- finite-difference / policy-iteration solver on y = x/(x+1)
    simulate  -- exact event-driven Monte Carlo of the controlled reserve
    verify    -- executable property checks on solver and simulator output
    cli       -- config parsing and subcommands
"""

from .model import ClaimLaw, ModelParams, premium_rate, min_retention, solvency_coefficient, validate_assumptions
from .hjb import Grid, ValueGrid, FeedbackPolicy, SolveReport, SolverConfig, solve, extract_policy

__all__ = [
    "ClaimLaw",
    "ModelParams",
    "premium_rate",
    "min_retention",
    "solvency_coefficient",
    "validate_assumptions",
    "Grid",
    "ValueGrid",
    "FeedbackPolicy",
    "SolveReport",
    "SolverConfig",
    "solve",
    "extract_policy",
]
__version__ = "0.1.0"
