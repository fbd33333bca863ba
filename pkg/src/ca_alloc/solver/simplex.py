"""Bounded dual simplex on a sparse LU basis with product-form updates.

The model is ``min c'x`` subject to ``rlo <= A x <= rhi`` and ``lb <= x <= ub``.
One logical column ``w = A x`` is added per row, so the equality system is
``[A  -I] (x, w) = 0`` and the slack basis is always available. Infinite
bounds are replaced by a wide artificial box so that every nonbasic column
sits at a finite bound; a dual feasible start then always exists and the
same code reoptimizes branch-and-bound children after bound changes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels as K
from .kernels import AT_LOWER, AT_UPPER, BASIC, FIXED

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
PRIMAL_TOL = 1e-7
DUAL_TOL = 1e-7
ARTIFICIAL_BOUND = 1e7
REFACTOR_EVERY = 64
PERTURBATION = 5e-7
DENSE_LU_MAX_ROWS = 120


class NumericalFailure(RuntimeError):
    """The simplex could not certify a result even with Bland's rule."""


@dataclass
class Basis:
    head: np.ndarray
    status: np.ndarray


@dataclass
class SimplexResult:
    status: str  # optimal | infeasible | unbounded
    objective: float
    x: np.ndarray  # structural values in the caller's (unscaled) space
    basis: Basis | None
    iterations: int


def _pow2(v):
    return np.exp2(np.round(np.log2(v)))


def scale_factors(A: sp.csr_matrix, passes: int = 6):
    """Geometric-mean row/column scaling rounded to powers of two."""
    m, n = A.shape
    rs = np.ones(m)
    cs = np.ones(n)
    if A.nnz == 0:
        return rs, cs
    B = abs(A).tocoo()
    r, c, v = B.row, B.col, B.data
    for _ in range(passes):
        vv = v * rs[r] * cs[c]
        rmax = np.zeros(m)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, r, vv)
        np.minimum.at(rmin, r, vv)
        ok = rmax > 0
        rs[ok] /= np.sqrt(rmax[ok] * rmin[ok])
        vv = v * rs[r] * cs[c]
        cmax = np.zeros(n)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, c, vv)
        np.minimum.at(cmin, c, vv)
        ok = cmax > 0
        cs[ok] /= np.sqrt(cmax[ok] * cmin[ok])
    return _pow2(rs), _pow2(cs)


class _Factor:
    def __init__(self, kern, m):
        self.k = kern
        self.m = m
        self.lu = None
        self.dense = m <= DENSE_LU_MAX_ROWS
        self._reset_etas()

    def _reset_etas(self):
        self.eta_r = []
        self.eta_idx = []
        self.eta_val = []
        self._packed = None

    def factor(self, B: sp.csc_matrix):
        self._reset_etas()
        if self.dense:
            lu, piv = sla.lu_factor(B.toarray(), check_finite=False)
            if np.min(np.abs(np.diag(lu))) < 1e-11:
                raise np.linalg.LinAlgError("singular basis")
            self.lu = (lu, piv)
        else:
            self.lu = spla.splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
            self.tri = None
            if self.k.lu_solve is not None:
                L = self.lu.L.tocsc()
                U = self.lu.U.tocsc()
                self.tri = (
                    L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data, L.diagonal(),
                    U.indptr.astype(np.int64), U.indices.astype(np.int64), U.data, U.diagonal(),
                    self.lu.perm_r.astype(np.int64), self.lu.perm_c.astype(np.int64),
                )

    def _base_solve(self, v, trans):
        if self.dense:
            return sla.lu_solve(self.lu, v, trans=1 if trans else 0, check_finite=False)
        if self.tri is not None:
            return self.k.lu_solve(np.asarray(v, dtype=float), bool(trans), *self.tri)
        return self.lu.solve(v, trans="T" if trans else "N")

    @property
    def n_etas(self):
        return len(self.eta_r)

    def _pack(self):
        if self._packed is None:
            ptr = np.zeros(len(self.eta_r) + 1, dtype=np.int64)
            if self.eta_r:
                ptr[1:] = np.cumsum([len(i) for i in self.eta_idx])
                idx = np.concatenate(self.eta_idx).astype(np.int64)
                val = np.concatenate(self.eta_val)
            else:
                idx = np.empty(0, dtype=np.int64)
                val = np.empty(0)
            self._packed = (np.array(self.eta_r, dtype=np.int64), ptr, idx, val)
        return self._packed

    def ftran(self, v):
        x = np.ascontiguousarray(self._base_solve(v, False), dtype=float)
        if self.eta_r:
            x = self.k.ftran_eta(x, *self._pack())
        return x

    def btran(self, v):
        v = np.array(v, dtype=float)
        if self.eta_r:
            v = self.k.btran_eta(v, *self._pack())
        return np.ascontiguousarray(self._base_solve(v, True), dtype=float)

    def push(self, r, alpha):
        nz = np.flatnonzero(np.abs(alpha) > 1e-13)
        if r not in nz:
            nz = np.append(nz, r)
        self.eta_r.append(int(r))
        self.eta_idx.append(nz)
        self.eta_val.append(alpha[nz].copy())
        self._packed = None


class DualSimplex:
    """Reusable LP engine for one constraint matrix with varying bounds.

    Construct once per model; call :meth:`solve` with column bounds and an
    optional warm basis. Inputs are in the unscaled space of the caller.
    """

    def __init__(self, A, rlo, rhi, cost, *, use_jit=None, max_iter=None):
        self.k = K.select(use_jit)
        A = sp.csr_matrix(A, dtype=float)
        self.m, self.n = A.shape
        self.rs, self.cs = scale_factors(A)
        As = sp.diags(self.rs) @ A @ sp.diags(self.cs)
        self.A = As.tocsr()
        self.A_csc = As.tocsc()
        self.AT = self.A_csc.T.tocsr()
        self.rlo = np.asarray(rlo, float) * self.rs
        self.rhi = np.asarray(rhi, float) * self.rs
        c = np.asarray(cost, float) * self.cs
        cmax = np.max(np.abs(c)) if c.size else 0.0
        self.obj_scale = 1.0 / cmax if cmax > 0 else 1.0
        self.cost = np.concatenate([c * self.obj_scale, np.zeros(self.m)])
        self.max_iter = max_iter
        self._xi = None
        self.total_iterations = 0

    # ------------------------------------------------------------------ setup

    def _bounds(self, lb, ub):
        lb = np.asarray(lb, float) / self.cs
        ub = np.asarray(ub, float) / self.cs
        lo = np.concatenate([lb, self.rlo])
        up = np.concatenate([ub, self.rhi])
        art_lo = ~np.isfinite(lo)
        art_up = ~np.isfinite(up)
        lo = np.where(art_lo, -ARTIFICIAL_BOUND, lo)
        up = np.where(art_up, ARTIFICIAL_BOUND, up)
        return lo, up, art_lo | art_up

    def _column(self, j):
        if j < self.n:
            col = np.zeros(self.m)
            s, e = self.A_csc.indptr[j], self.A_csc.indptr[j + 1]
            col[self.A_csc.indices[s:e]] = self.A_csc.data[s:e]
            return col
        col = np.zeros(self.m)
        col[j - self.n] = -1.0
        return col

    def _times(self, xfull):
        """[A -I] @ xfull."""
        return self.A @ xfull[: self.n] - xfull[self.n :]

    def _basis_matrix(self, head):
        cols_struct = head[head < self.n]
        pos_struct = np.flatnonzero(head < self.n)
        sub = self.A_csc[:, cols_struct].tocoo()
        rows = [sub.row]
        cols = [pos_struct[sub.col]]
        vals = [sub.data]
        pos_log = np.flatnonzero(head >= self.n)
        rows.append(head[pos_log] - self.n)
        cols.append(pos_log)
        vals.append(-np.ones(pos_log.size))
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.m, self.m)
        )

    # ------------------------------------------------------------------ solve

    def solve(self, lb, ub, basis: Basis | None = None) -> SimplexResult:
        m, n = self.m, self.n
        N = n + m
        lo, up, artificial = self._bounds(lb, ub)
        if np.any(lo > up + PRIMAL_TOL):
            return SimplexResult("infeasible", np.nan, np.full(n, np.nan), None, 0)

        if m == 0:
            x = np.where(self.cost[:n] >= 0, lo[:n], up[:n])
            if np.any(artificial[:n] & (self.cost[:n] != 0)):
                return SimplexResult("unbounded", np.nan, x * self.cs, None, 0)
            return SimplexResult("optimal", float(self.cost[:n] @ x / self.obj_scale), x * self.cs, None, 0)

        if basis is None:
            head = np.arange(n, N, dtype=np.int64)
            status = np.empty(N, dtype=np.int64)
            status[:n] = np.where(self.cost[:n] >= 0, AT_LOWER, AT_UPPER)
            status[n:] = BASIC
        else:
            head = basis.head.copy()
            status = basis.status.copy()
        status[(status != BASIC) & (lo == up)] = FIXED
        fixed_back = (status == FIXED) & (lo != up)
        status[fixed_back] = AT_LOWER

        fac = _Factor(self.k, m)
        try:
            fac.factor(self._basis_matrix(head))
        except (RuntimeError, np.linalg.LinAlgError):
            log.debug("warm basis singular; falling back to the slack basis")
            head = np.arange(n, N, dtype=np.int64)
            status[:n] = np.where(self.cost[:n] >= 0, AT_LOWER, AT_UPPER)
            status[(np.arange(N) < n) & (lo == up)] = FIXED
            status[n:] = BASIC
            fac.factor(self._basis_matrix(head))

        state = _State(self, fac, head, status, np.zeros(N), lo, up, np.ones(m))
        # Most columns carry zero cost, so the dual is highly degenerate. Solve
        # with a small deterministic cost perturbation first, then restore the
        # true costs and finish with primal pivots.
        state.cost = self._perturbed_cost(status, lo, up)
        state.recompute()
        state.restore_dual_feasibility()
        budget = self.max_iter or max(20 * N, 5000)
        it = 0
        for _ in range(4):
            found, k = self._dual_loop(state, budget)
            it += k
            if not found:
                self.total_iterations += it
                return SimplexResult("infeasible", np.nan, np.full(n, np.nan), None, it)
            if state.cost is not self.cost:
                state.cost = self.cost
                state.recompute()
            it += self._primal_loop(state, budget)
            state.refactor()
            if not np.any(state.primal_infeasibility() > PRIMAL_TOL) and not state.dual_infeasible().any():
                break
            state.weights = np.ones(m)
        else:
            raise NumericalFailure("basis drifted out of primal feasibility")
        self.total_iterations += it
        return self._finish(state, artificial, it)

    def _perturbed_cost(self, status, lo, up):
        N = self.n + self.m
        if self._xi is None:
            rng = np.random.default_rng(20240531)
            self._xi = PERTURBATION * (1.0 + rng.random(N))
        xi = self._xi * (1.0 + np.abs(self.cost))
        # only nonbasic columns are perturbed, in the direction that keeps a
        # warm basis dual feasible
        sign = np.where(status == AT_UPPER, -1.0, np.where(status == AT_LOWER, 1.0, 0.0))
        xi = np.where(lo == up, 0.0, xi * sign)
        return self.cost + xi

    def _dual_loop(self, state, budget):
        """Dual simplex pivots until primal feasible; returns (feasible, iterations)."""
        m, n = self.m, self.n
        lo, up = state.lo, state.up
        fac = state.fac
        it = 0
        degenerate = 0
        bland = False
        bland_after = 2 * (m + n)
        retry = 0
        while True:
            it += 1
            if it > budget:
                if not bland:
                    bland = True
                    budget += 10 * (m + n)
                    continue
                raise NumericalFailure(f"dual simplex did not converge in {it} iterations")
            xb = state.x[state.head]
            r = self.k.leaving(xb, lo[state.head], up[state.head], state.weights, PRIMAL_TOL, bland, state.head)
            if r < 0:
                if state.restore_dual_feasibility():
                    continue
                return True, it
            p = state.head[r]
            leave_up = xb[r] > up[p]
            delta = xb[r] - (up[p] if leave_up else lo[p])

            e = np.zeros(m)
            e[r] = 1.0
            rho = fac.btran(e)
            alpha = np.concatenate([self.AT @ rho, -rho])
            alpha[state.head] = 0.0
            q, flips = self.k.ratio(
                alpha, state.d, state.status, lo, up, 1.0 if delta > 0 else -1.0, abs(delta),
                PIVOT_TOL, bland, DUAL_TOL,
            )
            if q < 0:
                if state.n_etas or retry:
                    # confirm on a fresh factorization before declaring infeasibility
                    if retry < 2:
                        retry += 1
                        state.refactor()
                        continue
                return False, it
            alpha_q = fac.ftran(self._column(q))
            a_rq = alpha[q]
            if abs(alpha_q[r] - a_rq) > 1e-6 * (1.0 + abs(a_rq)) and state.n_etas and retry < 3:
                retry += 1
                state.refactor()
                continue
            retry = 0

            theta_d = state.d[q] / a_rq
            state.d -= theta_d * alpha
            state.d[p] = -theta_d
            state.d[q] = 0.0

            if flips.size:
                state.flip(flips)
                delta = state.x[p] - (up[p] if leave_up else lo[p])

            theta_p = delta / alpha_q[r]
            tau = fac.ftran(rho)
            w_r = state.weights[r]
            state.weights = self.k.dse(state.weights, alpha_q, tau, r, w_r)

            state.x[state.head] -= theta_p * alpha_q
            state.x[q] += theta_p
            state.pivot(r, q, p, AT_UPPER if leave_up else AT_LOWER, alpha_q)

            if abs(theta_d) < 1e-12:
                degenerate += 1
                if degenerate > bland_after and not bland:
                    log.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0

    def _primal_loop(self, state, budget):
        """Primal simplex from a primal feasible basis until the reduced costs agree."""
        m, n = self.m, self.n
        lo, up = state.lo, state.up
        fac = state.fac
        it = 0
        degenerate = 0
        bland = False
        while True:
            bad = state.dual_infeasible()
            if not bad.any():
                return it
            it += 1
            if it > budget:
                if not bland:
                    bland = True
                    budget += 10 * (m + n)
                else:
                    raise NumericalFailure(f"primal cleanup did not converge in {it} iterations")
            cand = np.flatnonzero(bad)
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(state.d[cand]))])
            dirn = 1.0 if state.status[q] == AT_LOWER else -1.0
            alpha_q = fac.ftran(self._column(q))
            g = dirn * alpha_q  # basic values move by -t * g
            xb = state.x[state.head]
            lb_, ub_ = lo[state.head], up[state.head]
            dec = g > PIVOT_TOL
            inc = g < -PIVOT_TOL
            loose = np.full(m, np.inf)
            loose[dec] = (xb[dec] - lb_[dec] + PRIMAL_TOL) / g[dec]
            loose[inc] = (xb[inc] - ub_[inc] - PRIMAL_TOL) / g[inc]
            span = up[q] - lo[q]
            t_max = min(float(loose.min()) if m else np.inf, span)
            exact = np.full(m, np.inf)
            exact[dec] = (xb[dec] - lb_[dec]) / g[dec]
            exact[inc] = (xb[inc] - ub_[inc]) / g[inc]
            rows = np.flatnonzero(exact <= t_max)
            if rows.size == 0 or (span <= t_max and span <= exact[rows].min()):
                # the entering column reaches its opposite bound first
                state.flip(np.array([q]))
                continue
            if bland:
                r = int(rows[np.argmin(state.head[rows])])
            else:
                r = int(rows[np.argmax(np.abs(g[rows]))])
            t = max(float(exact[r]), 0.0)
            p = state.head[r]
            to_lower = g[r] > 0

            e = np.zeros(m)
            e[r] = 1.0
            rho = fac.btran(e)
            alpha = np.concatenate([self.AT @ rho, -rho])
            alpha[state.head] = 0.0
            theta_d = state.d[q] / alpha[q]
            state.d -= theta_d * alpha
            state.d[p] = -theta_d
            state.d[q] = 0.0

            state.x[state.head] -= t * g
            state.x[q] += dirn * t
            state.pivot(r, q, p, AT_LOWER if to_lower else AT_UPPER, alpha_q)
            if t < 1e-12:
                degenerate += 1
                if degenerate > 2 * (m + n) and not bland:
                    bland = True
            else:
                degenerate = 0

    def _finish(self, state, artificial, it):
        n = self.n
        x = state.x
        at_art = artificial & (np.abs(x) >= 0.5 * ARTIFICIAL_BOUND)
        if np.any(at_art):
            return SimplexResult("unbounded", -np.inf, x[:n] * self.cs, None, it)
        xs = x[:n] * self.cs
        obj = float(self.cost[:n] @ x[:n]) / self.obj_scale
        return SimplexResult("optimal", obj, xs, Basis(state.head.copy(), state.status.copy()), it)


class _State:
    def __init__(self, lp, fac, head, status, x, lo, up, weights):
        self.lp = lp
        self.fac = fac
        self.head = head
        self.status = status
        self.x = x
        self.lo = lo
        self.up = up
        self.weights = weights
        self.d = np.zeros(len(x))
        self.cost = lp.cost

    @property
    def n_etas(self):
        return self.fac.n_etas

    def place_nonbasic(self):
        st = self.status
        self.x[st == AT_LOWER] = self.lo[st == AT_LOWER]
        self.x[st == AT_UPPER] = self.up[st == AT_UPPER]
        fx = st == FIXED
        self.x[fx] = self.lo[fx]

    def recompute(self):
        lp = self.lp
        self.place_nonbasic()
        xn = self.x.copy()
        xn[self.head] = 0.0
        self.x[self.head] = -self.fac.ftran(lp._times(xn))
        y = self.fac.btran(self.cost[self.head])
        self.d = self.cost - np.concatenate([lp.AT @ y, -y])
        self.d[self.head] = 0.0

    def refactor(self):
        self.fac.factor(self.lp._basis_matrix(self.head))
        self.recompute()

    def flip(self, cols):
        """Move nonbasic columns to their opposite bound and update the basics."""
        lo, up = self.lo, self.up
        at_lo = self.status[cols] == AT_LOWER
        dx = np.where(at_lo, up[cols] - lo[cols], lo[cols] - up[cols])
        self.status[cols] = np.where(at_lo, AT_UPPER, AT_LOWER)
        self.x[cols] += dx
        coll = np.zeros(len(self.x))
        coll[cols] = dx
        self.x[self.head] -= self.fac.ftran(self.lp._times(coll))

    def pivot(self, r, q, p, leave_status, alpha_q):
        self.x[p] = self.up[p] if leave_status == AT_UPPER else self.lo[p]
        self.status[p] = FIXED if self.lo[p] == self.up[p] else leave_status
        self.status[q] = BASIC
        self.head[r] = q
        self.fac.push(r, alpha_q)
        if self.fac.n_etas >= REFACTOR_EVERY:
            self.refactor()

    def dual_infeasible(self):
        st, d = self.status, self.d
        return ((st == AT_LOWER) & (d < -DUAL_TOL)) | ((st == AT_UPPER) & (d > DUAL_TOL))

    def restore_dual_feasibility(self) -> bool:
        """Flip boxed nonbasics whose reduced cost has the wrong sign."""
        st, d = self.status, self.d
        bad = ((st == AT_LOWER) & (d < -DUAL_TOL)) | ((st == AT_UPPER) & (d > DUAL_TOL))
        if not np.any(bad):
            return False
        st[bad & (st == AT_LOWER)] = -1
        st[bad & (st == AT_UPPER)] = AT_LOWER
        st[st == -1] = AT_UPPER
        self.recompute()
        return True

    def primal_infeasibility(self):
        xb = self.x[self.head]
        lo = self.lo[self.head]
        up = self.up[self.head]
        return np.maximum(np.maximum(lo - xb, xb - up), 0.0)
