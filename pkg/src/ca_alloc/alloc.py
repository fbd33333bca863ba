"""End-to-end allocation: the carrier-aggregation MILP, the proportional no-CA
baseline, multi-epoch evolution under a swap budget, and the capacity metrics.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .linkbudget import rate_matrix
from .milp import build_milp, decode
from .model import SCHEMA_VERSION, Scenario, _matrix_out, dumps, swap_distance, validate_scenario
from .solver import FEASIBLE, OPTIMAL, TIME_LIMIT, branch_and_bound

log = logging.getLogger(__name__)

CA = "ca"
BASELINE = "baseline"
# phase-2 objective weight per bit/s; keeps objective values in Mbit/s
PHASE2_WEIGHT = 1e-6

_STATUS_RANK = {OPTIMAL: 0, "baseline": 0, FEASIBLE: 1, TIME_LIMIT: 2}


class ValidationError(ValueError):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class SolverFailure(RuntimeError):
    """The MILP produced no usable association (infeasible, or out of time with no incumbent)."""

    def __init__(self, status, message=""):
        super().__init__(message or f"solver returned {status}")
        self.status = status


@dataclass
class AllocationResult:
    kind: str
    A: np.ndarray
    F: np.ndarray
    L: np.ndarray
    psi: float
    supply_bps: np.ndarray
    demand_bps: np.ndarray
    unmet_bps: float
    unused_bps: float
    swap_count: Optional[int]
    status: str
    gap: float = 0.0
    details: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def min_ratio(self) -> float:
        return compute_metrics(self.demand_bps, self.supply_bps)[2]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "type": "allocation",
            "kind": self.kind,
            "status": self.status,
            "gap": _finite(self.gap),
            "psi": _finite(self.psi),
            "unmet_bps": self.unmet_bps,
            "unused_bps": self.unused_bps,
            "swap_count": self.swap_count,
            "demand_bps": self.demand_bps.tolist(),
            "supply_bps": self.supply_bps.tolist(),
            "A": _matrix_out(self.A),
            "F": _matrix_out(self.F),
            "L": _matrix_out(self.L),
            "details": {k: _finite(v) for k, v in sorted(self.details.items())},
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AllocationResult":
        if d.get("schema") != SCHEMA_VERSION or d.get("type") != "allocation":
            raise ValueError("not an allocation result document")
        return cls(
            kind=d["kind"],
            A=np.array(d["A"], dtype=float),
            F=np.array(d["F"], dtype=float),
            L=np.array(d["L"], dtype=float),
            psi=_float(d["psi"]),
            supply_bps=np.array(d["supply_bps"], dtype=float),
            demand_bps=np.array(d["demand_bps"], dtype=float),
            unmet_bps=float(d["unmet_bps"]),
            unused_bps=float(d["unused_bps"]),
            swap_count=d.get("swap_count"),
            status=d["status"],
            gap=_float(d.get("gap", 0.0)),
            details=dict(d.get("details", {})),
            warnings=list(d.get("warnings", [])),
        )


def _finite(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return None
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
    if isinstance(v, np.integer):
        return int(v)
    return v


def _float(v) -> float:
    if v is None:
        return float("nan")
    return float(v)


@dataclass
class EvolutionTrace:
    q: Optional[int]
    demands: list  # one demand vector per epoch
    results: list  # AllocationResult per epoch
    error: Optional[str] = None

    @property
    def swap_counts(self) -> list:
        return [r.swap_count for r in self.results]

    @property
    def final(self) -> AllocationResult:
        return self.results[-1]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "type": "evolution",
            "q": "unconstrained" if self.q is None else self.q,
            "error": self.error,
            "epochs": [
                {"epoch": t, "demand_bps": list(map(float, d)), "result": r.to_dict()}
                for t, (d, r) in enumerate(zip(self.demands, self.results))
            ],
        }


def compute_metrics(d, s):
    """Unmet and unused capacity in bit/s and the smallest supply/demand ratio.

    The ratio only covers users with positive demand and is +inf without any.
    """
    d = np.asarray(d, dtype=float)
    s = np.asarray(s, dtype=float)
    if d.shape != s.shape:
        raise ValueError("demand and supply vectors differ in length")
    unmet = float(np.maximum(d - s, 0.0).sum())
    unused = float(np.maximum(s - d, 0.0).sum())
    pos = d > 0
    ratio = float(np.min(s[pos] / d[pos])) if pos.any() else float("inf")
    return unmet, unused, ratio


def _check(s: Scenario):
    problems = validate_scenario(s)
    if problems:
        raise ValidationError(problems)


def _result(kind, s, r, A, F, L, psi, status, gap=0.0, details=None, warnings=None):
    d = s.demands
    supply = (L * r).sum(axis=0)
    unmet, unused, _ = compute_metrics(d, supply)
    swaps = None
    if s.prev_association is not None:
        swaps = swap_distance(s.prev_association, A)
    return AllocationResult(
        kind=kind, A=A, F=F, L=L, psi=float(psi), supply_bps=supply, demand_bps=d,
        unmet_bps=unmet, unused_bps=unused, swap_count=swaps, status=status, gap=float(gap),
        details=details or {}, warnings=warnings or [],
    )


def _tidy(sol_x, p, r, d, no_oversupply):
    """Matrices from a solver vector, cleaned of solver-tolerance noise.

    ``A`` is rounded, ``F`` and ``L`` are clipped to [0, 1] and ``L`` is
    zeroed where ``A`` is. With the oversupply cap on, a user whose computed
    supply exceeds demand by rounding has its fill rates scaled down to match.
    """
    m = decode(p, sol_x)
    A = np.rint(m["A"])
    F = np.clip(m["F"], 0.0, 1.0)
    L = np.clip(m["L"], 0.0, 1.0) * A
    if no_oversupply:
        supply = (L * r).sum(axis=0)
        over = supply > d
        if over.any():
            scale = np.ones_like(supply)
            scale[over] = d[over] / supply[over]
            L = L * scale
            F = np.where(A > 0, F * scale, F)
    return A, F, L, m["psi"]


def _worse(a, b):
    return a if _STATUS_RANK.get(a, 3) >= _STATUS_RANK.get(b, 3) else b


def allocate_ca(s: Scenario, *, rates=None, node_log=None, on_incumbent=None, use_jit=None) -> AllocationResult:
    """Solve the max-min association and fill-rate problem for ``s``.

    With ``lexicographic_phase2`` (and the oversupply cap) a second solve
    keeps the fairness level and maximizes total supply, which is what
    brings the unmet capacity down. ``on_incumbent(s, p, x)`` sees every
    incumbent of either phase together with the model it belongs to.
    """
    _check(s)
    r = rate_matrix(s) if rates is None else np.asarray(rates, dtype=float)
    d = s.demands
    n_c, n_u = s.shape
    if not np.any(d > 0):
        z = np.zeros((n_c, n_u))
        return _result(CA, s, r, z, z.copy(), z.copy(), 1.0, OPTIMAL,
                       details={"note": "all demands zero; psi is 1 by convention"})

    p = build_milp(s, r)
    hook = None if on_incumbent is None else (lambda x: on_incumbent(s, p, x))
    sol = branch_and_bound(p, s.solver, node_log=node_log, on_incumbent=hook, use_jit=use_jit)
    if sol.x is None:
        raise SolverFailure(sol.status)
    details = {
        "psi_bound": sol.bound,
        "psi_gap": sol.gap,
        "nodes": sol.nodes,
    }
    status, gap, x = sol.status, sol.gap, sol.x
    if s.solver.lexicographic_phase2 and s.solver.no_oversupply:
        psi_idx = p.block("psi")
        lb = p.lb.copy()
        lb[psi_idx] = x[psi_idx]
        obj = np.zeros(p.n_vars)
        obj[p.block("s")] = PHASE2_WEIGHT
        p2 = p.with_bounds(lb=lb).with_objective(obj)
        hook2 = None if on_incumbent is None else (lambda x2: on_incumbent(s, p2, x2))
        sol2 = branch_and_bound(
            p2, s.solver, incumbent=x, node_log=node_log, on_incumbent=hook2, use_jit=use_jit
        )
        if sol2.x is not None:
            x = sol2.x
            details.update(
                {"supply_bound_mbps": sol2.bound, "supply_gap": sol2.gap, "phase2_nodes": sol2.nodes}
            )
            status = _worse(status, sol2.status)
            gap = max(gap, sol2.gap)
        else:
            log.warning("phase 2 returned %s; keeping the phase-1 solution", sol2.status)
    A, F, L, psi = _tidy(x, p, r, d, s.solver.no_oversupply)
    return _result(CA, s, r, A, F, L, psi, status, gap, details)


def allocate_baseline_no_ca(s: Scenario, *, rates=None) -> AllocationResult:
    """Single-carrier attachment with demand-proportional sharing of each carrier.

    Each user takes its eligible carrier with the highest rate (lowest index
    on ties); each carrier is split in proportion to its users' demands.
    """
    _check(s)
    r = rate_matrix(s) if rates is None else np.asarray(rates, dtype=float)
    d = s.demands
    n_c, n_u = s.shape
    A = np.zeros((n_c, n_u))
    warnings = []
    for u in range(n_u):
        if not np.any(r[:, u] > 0):
            warnings.append(f"user {s.users[u].id}: no eligible carrier")
            continue
        A[int(np.argmax(r[:, u])), u] = 1.0
    load = (A * d).sum(axis=1)
    F = np.zeros((n_c, n_u))
    busy = load > 0
    F[busy] = A[busy] * d / load[busy, None]
    L = F * A
    _, _, ratio = compute_metrics(d, (L * r).sum(axis=0))
    psi = ratio if np.isfinite(ratio) else 1.0
    return _result(BASELINE, s, r, A, F, L, psi, "baseline", warnings=warnings)


def evolve(
    s: Scenario,
    demand_profiles=None,
    q: Optional[int] = None,
    *,
    rates=None,
    on_incumbent=None,
    use_jit=None,
) -> EvolutionTrace:
    """Re-solve across demand epochs, limiting association changes to ``q`` per step.

    Epoch 0 ignores the swap budget; each later epoch uses the previous
    association as ``prev_association``. ``q=None`` leaves every epoch free.
    """
    profiles = s.demand_profiles if demand_profiles is None else demand_profiles
    if profiles is None:
        raise ValueError("scenario has no demand profiles")
    profiles = np.asarray(profiles, dtype=float)
    if profiles.ndim != 2 or profiles.shape[0] < 2:
        raise ValueError("evolution needs at least two demand profiles")
    if profiles.shape[1] != s.n_users:
        raise ValueError("demand profiles do not match the user set")
    if q is not None and q < 0:
        raise ValueError("swap budget must be nonnegative")
    r = rate_matrix(s) if rates is None else np.asarray(rates, dtype=float)
    trace = EvolutionTrace(q=q, demands=[], results=[])
    prev = None
    for t, dem in enumerate(profiles):
        step = replace(s.with_demands(dem), prev_association=prev, demand_profiles=None)
        step = step.with_solver(swap_budget_q=q if t > 0 else None)
        try:
            res = allocate_ca(step, rates=r, on_incumbent=on_incumbent, use_jit=use_jit)
        except SolverFailure as exc:
            # reusing the previous association is always feasible, so this is a bug or a time-out
            trace.error = f"epoch {t}: {exc}"
            log.error(trace.error)
            break
        trace.demands.append(dem.copy())
        trace.results.append(res)
        prev = res.A
    return trace


def result_json(res) -> str:
    return dumps(res.to_dict())
