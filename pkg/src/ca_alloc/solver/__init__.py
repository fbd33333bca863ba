"""LP relaxation, branch-and-bound and the enumeration oracle."""
from .bnb import FEASIBLE, INFEASIBLE, OPTIMAL, TIME_LIMIT, MilpSolution, branch_and_bound, relative_gap
from .lp import LpSolution, RelaxedModel, solve_lp
from .oracle import EnumerationTooLarge, enumerate_oracle
from .simplex import NumericalFailure

__all__ = [
    "FEASIBLE",
    "INFEASIBLE",
    "OPTIMAL",
    "TIME_LIMIT",
    "EnumerationTooLarge",
    "LpSolution",
    "MilpSolution",
    "NumericalFailure",
    "RelaxedModel",
    "branch_and_bound",
    "enumerate_oracle",
    "relative_gap",
    "solve_lp",
]
