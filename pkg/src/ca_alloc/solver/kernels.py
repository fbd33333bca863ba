"""Inner loops of the dual simplex.

Each kernel exists twice: an explicit-loop version compiled with numba and a
vectorized numpy version. Both return identical results; ``select()`` picks
one according to ``CA_ALLOC_DISABLE_JIT``. The sparse triangular solve has no
numpy twin: without numba the factorization's own solver is used, which
agrees to rounding.
"""
from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from .._jit import USE_JIT, njit

BASIC, AT_LOWER, AT_UPPER, FIXED = 0, 1, 2, 3


# ---------------------------------------------------------------- loop kernels


@njit
def _leaving_loop(x_b, lo_b, up_b, weights, tol, bland, head):
    best = -1
    best_score = 0.0
    best_var = 1 << 62
    for i in range(x_b.shape[0]):
        v = x_b[i]
        if v < lo_b[i] - tol:
            infeas = lo_b[i] - v
        elif v > up_b[i] + tol:
            infeas = v - up_b[i]
        else:
            continue
        if bland:
            if head[i] < best_var:
                best_var = head[i]
                best = i
        else:
            score = infeas * infeas / weights[i]
            if score > best_score:
                best_score = score
                best = i
    return best


@njit
def _ratio_loop(alpha, d, status, lo, up, sgn, slope, piv_tol, bland, harris_tol):
    n = alpha.shape[0]
    cand = np.empty(n, dtype=np.int64)
    ratio = np.empty(n, dtype=np.float64)
    k = 0
    for j in range(n):
        st = status[j]
        a = sgn * alpha[j]
        if st == AT_LOWER and a > piv_tol:
            t = d[j] / a
        elif st == AT_UPPER and a < -piv_tol:
            t = d[j] / a
        else:
            continue
        if t < 0.0:
            t = 0.0
        cand[k] = j
        ratio[k] = t
        k += 1
    flips = np.empty(0, dtype=np.int64)
    if k == 0:
        return -1, flips
    cand = cand[:k]
    ratio = ratio[:k]
    order = np.argsort(ratio, kind="mergesort")
    if bland:
        tmin = ratio[order[0]]
        q = -1
        for i in range(k):
            j = cand[order[i]]
            if ratio[order[i]] <= tmin and (q < 0 or j < q):
                q = j
        return q, flips
    flip_buf = np.empty(k, dtype=np.int64)
    nf = 0
    stop = k - 1
    for i in range(k):
        j = cand[order[i]]
        rng = up[j] - lo[j]
        slope -= rng * abs(alpha[j])
        if slope < 0.0 or i == k - 1:
            stop = i
            break
        flip_buf[nf] = j
        nf += 1
    # Harris pass: allow breakpoints up to a small dual infeasibility past the
    # stopping one and take the largest pivot among them
    t_max = np.inf
    for i in range(stop, k):
        j = cand[order[i]]
        tb = ratio[order[i]] + harris_tol / abs(alpha[j])
        if tb < t_max:
            t_max = tb
    q = cand[order[stop]]
    big = abs(alpha[q])
    for i in range(stop + 1, k):
        if ratio[order[i]] > t_max:
            break
        j = cand[order[i]]
        if abs(alpha[j]) > big:
            big = abs(alpha[j])
            q = j
    if slope > piv_tol and stop == k - 1:
        # every breakpoint could be passed: the dual ray is unbounded
        return -2, flip_buf[:nf]
    return q, flip_buf[:nf]


@njit
def _ftran_eta_loop(x, eta_r, eta_ptr, eta_idx, eta_val):
    for k in range(eta_r.shape[0]):
        r = eta_r[k]
        lo = eta_ptr[k]
        hi = eta_ptr[k + 1]
        piv = 0.0
        for t in range(lo, hi):
            if eta_idx[t] == r:
                piv = eta_val[t]
                break
        xr = x[r] / piv
        if xr != 0.0:
            for t in range(lo, hi):
                i = eta_idx[t]
                if i != r:
                    x[i] -= eta_val[t] * xr
        x[r] = xr
    return x


@njit
def _btran_eta_loop(v, eta_r, eta_ptr, eta_idx, eta_val):
    for k in range(eta_r.shape[0] - 1, -1, -1):
        r = eta_r[k]
        lo = eta_ptr[k]
        hi = eta_ptr[k + 1]
        acc = 0.0
        piv = 0.0
        for t in range(lo, hi):
            i = eta_idx[t]
            if i == r:
                piv = eta_val[t]
            else:
                acc += v[i] * eta_val[t]
        v[r] = (v[r] - acc) / piv
    return v


@njit
def _dse_loop(w, alpha_q, tau, r, w_r):
    a_r = alpha_q[r]
    for i in range(w.shape[0]):
        if i == r:
            continue
        ratio = alpha_q[i] / a_r
        if ratio == 0.0:
            continue
        nw = w[i] + ratio * (ratio * w_r - 2.0 * tau[i])
        floor = ratio * ratio * w_r
        if nw < floor:
            nw = floor
        if nw < 1e-8:
            nw = 1e-8
        w[i] = nw
    w[r] = max(w_r / (a_r * a_r), 1e-8)
    return w


@njit
def _lu_solve_loop(b, trans, Lp, Li, Lx, Ld, Up, Ui, Ux, Ud, perm_r, perm_c):
    """Solve with sparse LU factors ``Pr A Pc = L U`` stored column-wise."""
    n = b.shape[0]
    y = np.empty(n)
    if not trans:
        for i in range(n):
            y[perm_r[i]] = b[i]
        for j in range(n):
            yj = y[j] / Ld[j]
            y[j] = yj
            if yj != 0.0:
                for t in range(Lp[j], Lp[j + 1]):
                    i = Li[t]
                    if i > j:
                        y[i] -= Lx[t] * yj
        for j in range(n - 1, -1, -1):
            yj = y[j] / Ud[j]
            y[j] = yj
            if yj != 0.0:
                for t in range(Up[j], Up[j + 1]):
                    i = Ui[t]
                    if i < j:
                        y[i] -= Ux[t] * yj
        x = np.empty(n)
        for i in range(n):
            x[i] = y[perm_c[i]]
        return x
    for i in range(n):
        y[perm_c[i]] = b[i]
    for j in range(n):
        acc = y[j]
        for t in range(Up[j], Up[j + 1]):
            i = Ui[t]
            if i < j:
                acc -= Ux[t] * y[i]
        y[j] = acc / Ud[j]
    for j in range(n - 1, -1, -1):
        acc = y[j]
        for t in range(Lp[j], Lp[j + 1]):
            i = Li[t]
            if i > j:
                acc -= Lx[t] * y[i]
        y[j] = acc / Ld[j]
    x = np.empty(n)
    for i in range(n):
        x[i] = y[perm_r[i]]
    return x


@njit
def _greedy_fix_loop(order, indptr, indices, data, lb, ub, rmin, rmax, rlo, rhi, v):
    """Fix columns in ``order``, upper bound first, keeping every row satisfiable.

    ``rmin``/``rmax`` hold the row activity range over undecided columns and
    are updated in place. Returns False when some column fits neither bound.
    """
    for j in order:
        s = indptr[j]
        e = indptr[j + 1]
        placed = False
        for pick in range(2):
            val = ub[j] if pick == 0 else lb[j]
            ok = True
            for t in range(s, e):
                i = indices[t]
                a = data[t]
                if a > 0:
                    nmin = rmin[i] - a * lb[j] + a * val
                    nmax = rmax[i] - a * ub[j] + a * val
                else:
                    nmin = rmin[i] - a * ub[j] + a * val
                    nmax = rmax[i] - a * lb[j] + a * val
                if nmin > rhi[i] + 1e-9 or nmax < rlo[i] - 1e-9:
                    ok = False
                    break
            if ok:
                for t in range(s, e):
                    i = indices[t]
                    a = data[t]
                    if a > 0:
                        rmin[i] += a * (val - lb[j])
                        rmax[i] += a * (val - ub[j])
                    else:
                        rmin[i] += a * (val - ub[j])
                        rmax[i] += a * (val - lb[j])
                v[j] = val
                placed = True
                break
        if not placed:
            return False
    return True


# --------------------------------------------------------------- numpy twins


def _leaving_np(x_b, lo_b, up_b, weights, tol, bland, head):
    below = lo_b - x_b
    above = x_b - up_b
    infeas = np.where(below > tol, below, np.where(above > tol, above, 0.0))
    hit = np.flatnonzero(infeas > 0.0)
    if hit.size == 0:
        return -1
    if bland:
        return int(hit[np.argmin(head[hit])])
    score = infeas[hit] ** 2 / weights[hit]
    best = np.max(score)
    if not best > 0.0:
        return -1
    return int(hit[np.argmax(score)])


def _ratio_np(alpha, d, status, lo, up, sgn, slope, piv_tol, bland, harris_tol):
    a = sgn * alpha
    mask = ((status == AT_LOWER) & (a > piv_tol)) | ((status == AT_UPPER) & (a < -piv_tol))
    cand = np.flatnonzero(mask)
    empty = np.empty(0, dtype=np.int64)
    if cand.size == 0:
        return -1, empty
    ratio = np.maximum(d[cand] / a[cand], 0.0)
    order = np.argsort(ratio, kind="mergesort")
    cand, ratio = cand[order], ratio[order]
    if bland:
        tied = cand[ratio <= ratio[0]]
        return int(tied.min()), empty
    rng = (up[cand] - lo[cand]) * np.abs(alpha[cand])
    remaining = slope - np.cumsum(rng)
    neg = np.flatnonzero(remaining < 0.0)
    k = cand.size
    stop = int(neg[0]) if neg.size else k - 1
    flips = cand[:stop].astype(np.int64)
    tail_abs = np.abs(alpha[cand[stop:]])
    t_max = np.min(ratio[stop:] + harris_tol / tail_abs)
    tied = np.flatnonzero(ratio[stop:] <= t_max)
    # the first candidate always qualifies; argmax keeps the earliest on ties
    q = int(cand[stop + tied[int(np.argmax(tail_abs[tied]))]])
    if neg.size == 0 and remaining[-1] > piv_tol:
        return -2, flips
    return q, flips


def _ftran_eta_np(x, eta_r, eta_ptr, eta_idx, eta_val):
    for k in range(eta_r.shape[0]):
        r = eta_r[k]
        idx = eta_idx[eta_ptr[k] : eta_ptr[k + 1]]
        val = eta_val[eta_ptr[k] : eta_ptr[k + 1]]
        at = idx == r
        xr = x[r] / val[at][0]
        if xr != 0.0:
            off = ~at
            x[idx[off]] -= val[off] * xr
        x[r] = xr
    return x


def _btran_eta_np(v, eta_r, eta_ptr, eta_idx, eta_val):
    for k in range(eta_r.shape[0] - 1, -1, -1):
        r = eta_r[k]
        idx = eta_idx[eta_ptr[k] : eta_ptr[k + 1]]
        val = eta_val[eta_ptr[k] : eta_ptr[k + 1]]
        at = idx == r
        off = ~at
        v[r] = (v[r] - np.dot(v[idx[off]], val[off])) / val[at][0]
    return v


def _dse_np(w, alpha_q, tau, r, w_r):
    a_r = alpha_q[r]
    ratio = alpha_q / a_r
    nz = ratio != 0.0
    nz[r] = False
    rr = ratio[nz]
    nw = w[nz] + rr * (rr * w_r - 2.0 * tau[nz])
    nw = np.maximum(nw, rr * rr * w_r)
    w[nz] = np.maximum(nw, 1e-8)
    w[r] = max(w_r / (a_r * a_r), 1e-8)
    return w


def _greedy_fix_np(order, indptr, indices, data, lb, ub, rmin, rmax, rlo, rhi, v):
    for j in order:
        rows = indices[indptr[j] : indptr[j + 1]]
        a = data[indptr[j] : indptr[j + 1]]
        pos = a > 0
        for val in (ub[j], lb[j]):
            dmin = np.where(pos, a * (val - lb[j]), a * (val - ub[j]))
            dmax = np.where(pos, a * (val - ub[j]), a * (val - lb[j]))
            nmin = rmin[rows] + dmin
            nmax = rmax[rows] + dmax
            if np.all(nmin <= rhi[rows] + 1e-9) and np.all(nmax >= rlo[rows] - 1e-9):
                rmin[rows] = nmin
                rmax[rows] = nmax
                v[j] = val
                break
        else:
            return False
    return True


jit_kernels = SimpleNamespace(
    name="numba",
    leaving=_leaving_loop,
    ratio=_ratio_loop,
    ftran_eta=_ftran_eta_loop,
    btran_eta=_btran_eta_loop,
    dse=_dse_loop,
    lu_solve=_lu_solve_loop,
    greedy_fix=_greedy_fix_loop,
)

numpy_kernels = SimpleNamespace(
    name="numpy",
    leaving=_leaving_np,
    ratio=_ratio_np,
    ftran_eta=_ftran_eta_np,
    btran_eta=_btran_eta_np,
    dse=_dse_np,
    lu_solve=None,  # SuperLU's own triangular solves
    greedy_fix=_greedy_fix_np,
)


def select(use_jit: bool | None = None) -> SimpleNamespace:
    return jit_kernels if (USE_JIT if use_jit is None else use_jit) else numpy_kernels
