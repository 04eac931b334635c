"""Test scheduling for safety-critical systems under a Poisson-Gamma belief.

A Gamma belief over the hazardous event rate is updated from cumulative test
records; backward induction over that belief gives the number of tests to run
each quarter.
"""

__version__ = "0.1.0"

from .belief import GammaBelief, PriorSpec, SafetyRequirement, credibility, is_terminal, update  # noqa: E402
from .model import ConfigError, DTest, InnovationDist, ProblemSpec, State  # noqa: E402
from .rollout import WorldMode, run_episode, simulate  # noqa: E402
from .solver import (  # noqa: E402
    MemoryBudgetError,
    PolicyTable,
    UtilityTable,
    immediate_policy,
    solve,
    solve_problem,
    testing_region,
)

__all__ = [
    "ConfigError",
    "DTest",
    "GammaBelief",
    "InnovationDist",
    "MemoryBudgetError",
    "PolicyTable",
    "PriorSpec",
    "ProblemSpec",
    "SafetyRequirement",
    "State",
    "UtilityTable",
    "WorldMode",
    "credibility",
    "immediate_policy",
    "is_terminal",
    "run_episode",
    "simulate",
    "solve",
    "solve_problem",
    "testing_region",
    "update",
]
