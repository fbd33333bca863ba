"""Reductions applied once before the simplex sees a model.

Works on the row-range form ``rlo <= A x <= rhi``, ``lb <= x <= ub`` with a
minimization cost. Every reduction keeps at least one optimal solution of
the mixed-integer problem, so branch-and-bound may run on the reduced model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

TOL = 1e-9


class PresolveInfeasible(Exception):
    pass


@dataclass
class Reduced:
    A: sp.csr_matrix  # kept rows x kept cols
    rlo: np.ndarray
    rhi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    cost: np.ndarray
    integer: np.ndarray
    cols: np.ndarray  # original index of each kept column
    rows: np.ndarray
    fixed_value: np.ndarray  # full-length; value for removed columns
    obj_offset: float
    n_orig: int

    def expand(self, x_reduced) -> np.ndarray:
        x = self.fixed_value.copy()
        x[self.cols] = x_reduced
        return x


def row_ranges(senses, rhs):
    rlo = np.full(len(rhs), -np.inf)
    rhi = np.full(len(rhs), np.inf)
    for i, (s, b) in enumerate(zip(senses, rhs)):
        if s == "<=":
            rhi[i] = b
        elif s == ">=":
            rlo[i] = b
        else:
            rlo[i] = rhi[i] = b
    return rlo, rhi


def presolve(A, rlo, rhi, lb, ub, cost, integer, max_rounds=50) -> Reduced:
    A = sp.csr_matrix(A, dtype=float)
    m, n = A.shape
    lb = np.array(lb, dtype=float)
    ub = np.array(ub, dtype=float)
    rlo = np.array(rlo, dtype=float)
    rhi = np.array(rhi, dtype=float)
    cost = np.array(cost, dtype=float)
    integer = np.asarray(integer, dtype=bool)

    row_alive = np.ones(m, dtype=bool)
    col_alive = np.ones(n, dtype=bool)
    fixed_value = np.zeros(n)
    A.eliminate_zeros()
    A_csc = A.tocsc()
    absA = abs(A)
    offset = 0.0

    for _ in range(max_rounds):
        changed = False
        # fixed columns leave the model; their contribution moves into row ranges
        fix = np.flatnonzero(col_alive & (lb == ub))
        if fix.size:
            v = np.zeros(n)
            v[fix] = lb[fix]
            shift = A_csc @ v
            shift[~row_alive] = 0.0
            rlo -= shift
            rhi -= shift
            offset += float(cost[fix] @ lb[fix])
            fixed_value[fix] = lb[fix]
            col_alive[fix] = False
            changed = True
        # row scan: empty and singleton rows
        live_count = absA @ col_alive.astype(float)
        empty = np.flatnonzero(row_alive & (live_count == 0))
        if empty.size:
            scale = np.maximum.reduce([
                np.ones(empty.size),
                np.where(np.isfinite(rlo[empty]), np.abs(rlo[empty]), 1.0),
                np.where(np.isfinite(rhi[empty]), np.abs(rhi[empty]), 1.0),
            ])
            bad = (rlo[empty] > TOL * scale) | (rhi[empty] < -TOL * scale)
            if bad.any():
                raise PresolveInfeasible(f"row {empty[np.argmax(bad)]} cannot be satisfied")
            row_alive[empty] = False
            changed = True
        single = np.flatnonzero(row_alive & (live_count == 1))
        if single.size:
            sub = sp.csr_matrix(A[single] @ sp.diags(col_alive.astype(float)))
            sub.eliminate_zeros()
            j = sub.indices
            a = sub.data
            lo_i, hi_i = rlo[single], rhi[single]
            with np.errstate(invalid="ignore"):
                lo = np.where(a > 0, lo_i / a, hi_i / a)
                hi = np.where(a > 0, hi_i / a, lo_i / a)
            new_lo = np.full(n, -np.inf)
            new_hi = np.full(n, np.inf)
            np.maximum.at(new_lo, j, lo)
            np.minimum.at(new_hi, j, hi)
            _tighten(lb, ub, integer, new_lo, new_hi)
            row_alive[single] = False
            changed = True
        # columns that only ever loosen rows when pushed to a bound
        coo = A_csc.tocoo()
        live = row_alive[coo.row] & col_alive[coo.col]
        r_, c_, a_ = coo.row[live], coo.col[live], coo.data[live]
        block_down = np.where(a_ > 0, np.isfinite(rlo[r_]), np.isfinite(rhi[r_]))
        block_up = np.where(a_ > 0, np.isfinite(rhi[r_]), np.isfinite(rlo[r_]))
        nd = np.bincount(c_, weights=block_down, minlength=n)
        nu = np.bincount(c_, weights=block_up, minlength=n)
        down = col_alive & (nd == 0) & (cost >= 0) & np.isfinite(lb) & (lb != ub)
        up = col_alive & ~down & (nu == 0) & (cost <= 0) & np.isfinite(ub) & (lb != ub)
        if down.any() or up.any():
            ub[down] = lb[down]
            lb[up] = ub[up]
            changed = True
        if not changed:
            break

    _propagate_infinite_bounds(A, rlo, rhi, lb, ub, row_alive, col_alive)

    rows = np.flatnonzero(row_alive)
    cols = np.flatnonzero(col_alive)
    A_red = A[rows][:, cols].tocsr()
    A_red.eliminate_zeros()
    return Reduced(
        A=A_red,
        rlo=rlo[rows],
        rhi=rhi[rows],
        lb=lb[cols],
        ub=ub[cols],
        cost=cost[cols],
        integer=integer[cols],
        cols=cols,
        rows=rows,
        fixed_value=fixed_value,
        obj_offset=offset,
        n_orig=n,
    )


def _tighten(lb, ub, integer, lo, hi):
    lo = np.where(integer, np.ceil(lo - 1e-6), lo)
    hi = np.where(integer, np.floor(hi + 1e-6), hi)
    np.maximum(lb, lo, out=lb)
    np.minimum(ub, hi, out=ub)
    cross = lb > ub
    if cross.any():
        near = cross & (lb - ub <= 1e-7 * np.maximum(1.0, np.abs(lb)))
        if np.any(cross & ~near):
            raise PresolveInfeasible(f"column {np.flatnonzero(cross & ~near)[0]} bounds cross")
        ub[near] = lb[near]


def _propagate_infinite_bounds(A, rlo, rhi, lb, ub, row_alive, col_alive, passes=4):
    """Replace infinite column bounds by finite ones implied by row activities.

    Only infinite bounds are touched, so the LP optimum is unchanged.
    """
    open_cols = col_alive & ~(np.isfinite(lb) & np.isfinite(ub))
    if not open_cols.any():
        return
    rows_touching = np.flatnonzero(row_alive & (abs(A) @ open_cols.astype(float) > 0))
    for _ in range(passes):
        changed = False
        for i in rows_touching:
            lo_, hi_ = A.indptr[i], A.indptr[i + 1]
            idx = A.indices[lo_:hi_]
            val = A.data[lo_:hi_]
            keep = col_alive[idx]
            idx, val = idx[keep], val[keep]
            if idx.size < 2:
                continue
            # per-term min/max contributions
            tmin = np.where(val > 0, val * lb[idx], val * ub[idx])
            tmax = np.where(val > 0, val * ub[idx], val * lb[idx])
            for side, bound in (("hi", rhi[i]), ("lo", rlo[i])):
                if not np.isfinite(bound):
                    continue
                terms = tmin if side == "hi" else tmax
                finite = np.isfinite(terms)
                n_inf = int((~finite).sum())
                if n_inf > 1:
                    continue
                total = terms[finite].sum()
                for t in range(idx.size):
                    if n_inf == 1 and finite[t]:
                        continue
                    rest = total - (terms[t] if finite[t] else 0.0)
                    a = val[t]
                    j = idx[t]
                    implied = (bound - rest) / a
                    # a*x_j <= bound - rest  (hi side)  or  a*x_j >= bound - rest  (lo side)
                    upper = (side == "hi") == (a > 0)
                    if upper and np.isinf(ub[j]):
                        ub[j] = implied
                        changed = True
                    elif not upper and np.isinf(lb[j]):
                        lb[j] = implied
                        changed = True
        if not changed:
            break
