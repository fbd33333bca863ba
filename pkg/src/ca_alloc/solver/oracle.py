"""Exhaustive enumeration over associations, for cross-checking branch-and-bound.

Every binary assignment that satisfies the pure-binary rows (carrier caps and
the swap budget) is fixed in turn and the remaining LP in (f, lambda, s, psi)
is solved with HiGHS through scipy, so no code is shared with the simplex
used by branch-and-bound.

By default only maximal assignments are evaluated: for models built by
``build_milp`` switching an extra ``a`` on with ``f = lambda = 0`` leaves
every other value feasible, so some maximal assignment is always optimal.
``prune_dominated=False`` evaluates every feasible assignment.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..milp import MilpProblem
from .bnb import INFEASIBLE, OPTIMAL, MilpSolution
from .presolve import row_ranges

MAX_FREE_BINARIES = 20


class EnumerationTooLarge(ValueError):
    pass


def _binary_rows(p: MilpProblem, free):
    """Rows touching only binaries, with the fixed binaries folded into the range."""
    A = p.A.tocsr()
    bins = p.binary_mask
    rlo, rhi = row_ranges(p.senses, p.rhs)
    keep = []
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
        if cols.size and bins[cols].all():
            keep.append(i)
    if not keep:
        return np.zeros((0, free.size)), np.zeros(0), np.zeros(0)
    sub = A[keep]
    fixed = np.zeros(p.n_vars)
    fixed_cols = bins.copy()
    fixed_cols[free] = False
    fixed[fixed_cols] = p.lb[fixed_cols]
    shift = sub @ fixed
    return sub[:, free].toarray(), rlo[keep] - shift, rhi[keep] - shift


def feasible_assignments(p: MilpProblem, prune_dominated: bool = True):
    """Yield 0/1 vectors over the free binaries (``lb < ub``) in lexicographic order."""
    bins = np.flatnonzero(p.binary_mask)
    free = bins[p.lb[bins] < p.ub[bins]]
    B, lo, hi = _binary_rows(p, free)
    k = free.size
    pos = np.maximum(B, 0)
    neg = np.minimum(B, 0)
    # suffix sums give the activity range still reachable by undecided columns
    suf_min = np.zeros((k + 1, B.shape[0]))
    suf_max = np.zeros((k + 1, B.shape[0]))
    for j in range(k - 1, -1, -1):
        suf_min[j] = suf_min[j + 1] + neg[:, j]
        suf_max[j] = suf_max[j + 1] + pos[:, j]
    tol = 1e-9
    v = np.zeros(k)

    def rec(j, act):
        if np.any(act + suf_min[j] > hi + tol) or np.any(act + suf_max[j] < lo - tol):
            return
        if j == k:
            if not prune_dominated or _maximal(v, B, act, lo, hi, tol):
                yield v.copy()
            return
        for val in (0.0, 1.0):
            v[j] = val
            yield from rec(j + 1, act + B[:, j] * val)
        v[j] = 0.0

    yield from rec(0, np.zeros(B.shape[0]))


def _maximal(v, B, act, lo, hi, tol):
    for j in np.flatnonzero(v == 0):
        nxt = act + B[:, j]
        if np.all(nxt <= hi + tol) and np.all(nxt >= lo - tol):
            return False
    return True


def enumerate_oracle(
    p: MilpProblem,
    max_free_binaries: int = MAX_FREE_BINARIES,
    prune_dominated: bool = True,
) -> MilpSolution:
    bins = np.flatnonzero(p.binary_mask)
    free = bins[p.lb[bins] < p.ub[bins]]
    if free.size > max_free_binaries:
        raise EnumerationTooLarge(
            f"{free.size} free binaries exceed the enumeration cap of {max_free_binaries}"
        )
    rlo, rhi = row_ranges(p.senses, p.rhs)
    A = p.A.tocsr()
    eq = rlo == rhi
    up_rows = np.isfinite(rhi) & ~eq
    lo_rows = np.isfinite(rlo) & ~eq
    A_ub = sp.vstack([A[up_rows], -A[lo_rows]]).tocsr()
    b_ub = np.concatenate([rhi[up_rows], -rlo[lo_rows]])
    A_eq = A[eq]
    b_eq = rlo[eq]
    c = -p.objective if p.sense == "max" else p.objective.copy()

    best_x = None
    best = -np.inf
    count = 0
    for v in feasible_assignments(p, prune_dominated):
        count += 1
        lb = p.lb.copy()
        ub = p.ub.copy()
        lb[free] = v
        ub[free] = v
        bounds = np.column_stack([lb, np.where(np.isinf(ub), None, ub)])
        res = linprog(
            c,
            A_ub=A_ub if A_ub.shape[0] else None,
            b_ub=b_ub if A_ub.shape[0] else None,
            A_eq=A_eq if A_eq.shape[0] else None,
            b_eq=b_eq if A_eq.shape[0] else None,
            bounds=bounds,
            method="highs",
        )
        if res.status != 0:
            continue
        score = -res.fun  # larger is better in both senses
        if score > best + 1e-12:
            best = score
            best_x = np.asarray(res.x, dtype=float)
            best_x[free] = v
    if best_x is None:
        return MilpSolution(INFEASIBLE, None, np.nan, np.nan, np.inf, nodes=count)
    obj = float(p.objective @ best_x)
    return MilpSolution(OPTIMAL, best_x, obj, obj, 0.0, nodes=count)
