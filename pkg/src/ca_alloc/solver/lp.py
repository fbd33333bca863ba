from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..milp import MilpProblem
from .presolve import PresolveInfeasible, Reduced, presolve, row_ranges
from .simplex import DualSimplex

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray


class RelaxedModel:
    """Presolved LP relaxation of a :class:`MilpProblem`, in minimization form.

    Holds one :class:`DualSimplex` so repeated solves with different column
    bounds (branch-and-bound nodes, heuristics) share scaling and structure.
    """

    def __init__(self, p: MilpProblem, lb=None, ub=None, *, use_jit=None):
        self.p = p
        rlo, rhi = row_ranges(p.senses, p.rhs)
        sign = -1.0 if p.sense == "max" else 1.0
        self.sign = sign
        lb = p.lb if lb is None else lb
        ub = p.ub if ub is None else ub
        self.red: Reduced = presolve(p.A, rlo, rhi, lb, ub, sign * p.objective, p.binary_mask)
        r = self.red
        self.engine = DualSimplex(r.A, r.rlo, r.rhi, r.cost, use_jit=use_jit)

    @property
    def lb(self):
        return self.red.lb

    @property
    def ub(self):
        return self.red.ub

    def objective_of(self, min_obj: float) -> float:
        """Caller-sense objective from the reduced minimization value."""
        return self.sign * (min_obj + self.red.obj_offset)

    def solve(self, lb=None, ub=None, basis=None):
        r = self.red
        res = self.engine.solve(r.lb if lb is None else lb, r.ub if ub is None else ub, basis)
        return res


def solve_lp(p: MilpProblem, lb=None, ub=None, *, use_jit=None) -> LpSolution:
    """Solve the continuous relaxation of ``p`` (binaries relaxed to [0, 1])."""
    try:
        model = RelaxedModel(p, lb, ub, use_jit=use_jit)
    except PresolveInfeasible:
        return LpSolution(INFEASIBLE, float("nan"), np.full(p.n_vars, np.nan))
    res = model.solve()
    if res.status != OPTIMAL:
        obj = float("inf") if res.status == UNBOUNDED and p.sense == "max" else float("nan")
        if res.status == UNBOUNDED and p.sense != "max":
            obj = float("-inf")
        return LpSolution(res.status, obj, np.full(p.n_vars, np.nan))
    x = model.red.expand(res.x)
    return LpSolution(OPTIMAL, float(p.objective @ x), x)
