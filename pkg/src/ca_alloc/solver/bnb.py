"""Branch-and-bound over the binary columns of a :class:`MilpProblem`.

Best-first on the relaxation bound, with a depth-first plunge after every
new incumbent. Children reuse the parent's optimal basis. Two rounding
heuristics run at each node; both fix every binary and re-solve the LP, so
an accepted incumbent is always an exact LP optimum for its association.
"""
from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..milp import MilpProblem
from ..model import SolverParams
from . import kernels as K
from .lp import RelaxedModel
from .presolve import PresolveInfeasible

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time_limit"

INT_TOL = 1e-6


@dataclass
class MilpSolution:
    status: str
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int = 0
    lp_iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


def relative_gap(bound: float, objective: float) -> float:
    if not np.isfinite(objective):
        return np.inf
    return max(0.0, (bound - objective) / max(abs(bound), 1.0))


@dataclass(order=True)
class _Node:
    key: float  # minimization bound inherited from the parent
    seq: int
    depth: int = field(compare=False)
    changes: tuple = field(compare=False)  # ((col, lo, hi), ...) from the root
    basis: object = field(compare=False, default=None)


class _BinaryRows:
    """Rows whose support is entirely binary (per-user carrier caps, swap budget).

    Used to keep rounded assignments feasible before any LP is solved.
    """

    def __init__(self, red, kern):
        self.k = kern
        A = red.A.tocsr()
        integer = red.integer
        keep = []
        for i in range(A.shape[0]):
            cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
            if cols.size and integer[cols].all():
                keep.append(i)
        self.rows = np.array(keep, dtype=np.int64)
        self.A = A[self.rows].tocsc() if keep else None
        self.rlo = red.rlo[self.rows]
        self.rhi = red.rhi[self.rows]

    def feasible(self, v) -> bool:
        if self.A is None:
            return True
        act = self.A @ v
        return bool(np.all(act <= self.rhi + 1e-9) and np.all(act >= self.rlo - 1e-9))

    def greedy(self, ints, lb, ub, score):
        """Fix the binaries one at a time in decreasing ``score``, preferring 1.

        A variable is set to 1 whenever every binary row can still be
        satisfied by the undecided ones; the result is maximal in that sense.
        Returns the full vector of integer values or None.
        """
        v = lb.copy()
        if self.A is None:
            v[ints] = ub[ints]
            return v
        A = self.A
        # row activity range with undecided columns spanning their bounds
        pos = A.copy()
        pos.data = np.maximum(pos.data, 0)
        neg = A.copy()
        neg.data = np.minimum(neg.data, 0)
        rmin = pos @ lb + neg @ ub
        rmax = pos @ ub + neg @ lb
        if np.any(rmin > self.rhi + 1e-9) or np.any(rmax < self.rlo - 1e-9):
            return None
        free = ints[lb[ints] < ub[ints]]
        order = free[np.lexsort((free, -score[free]))].astype(np.int64)
        ok = self.k.greedy_fix(
            order, A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
            lb, ub, rmin, rmax, self.rlo, self.rhi, v,
        )
        return v if ok else None


class _Search:
    def __init__(self, p: MilpProblem, params: SolverParams, model: RelaxedModel, node_log, clock, use_jit=None):
        self.p = p
        self.use_jit = use_jit
        self.params = params
        self.model = model
        self.red = model.red
        self.ints = np.flatnonzero(self.red.integer)
        self.node_log = node_log
        self.clock = clock
        self.t0 = clock()
        self.bin_rows = _BinaryRows(self.red, K.select(use_jit))
        self.inc_x = None  # original space
        self.inc_min = np.inf  # minimization objective of the incumbent
        self.tried = set()
        self.lp_iterations = 0
        self.supply_of = _supply_weights(p, self.red)
        self.on_incumbent = None

    # objective helpers: the engine minimizes ``sign * objective``
    def caller(self, min_obj):
        return self.model.objective_of(min_obj)

    def gap(self, min_bound, min_inc) -> float:
        b = self.caller(min_bound)
        o = self.caller(min_inc)
        return relative_gap(b, o) if self.model.sign < 0 else relative_gap(-b, -o)

    def prunable(self, min_bound) -> bool:
        return self.inc_x is not None and self.gap(min_bound, self.inc_min) <= self.params.mip_gap

    def solve(self, lb, ub, basis):
        res = self.model.solve(lb, ub, basis)
        self.lp_iterations += res.iterations
        return res

    def try_assignment(self, vals) -> bool:
        """Fix all binaries to ``vals`` (reduced space) and keep the LP optimum if it improves.

        The fixed model is presolved on its own: with the association known
        most product rows collapse, so a cold solve of the small LP is
        cheaper than re-optimizing the full relaxation.
        """
        key = np.rint(vals[self.ints]).astype(np.int8).tobytes()
        if key in self.tried:
            return False
        self.tried.add(key)
        if not self.bin_rows.feasible(vals):
            return False
        p, red = self.p, self.red
        flo = red.fixed_value.copy()
        fup = red.fixed_value.copy()
        flo[red.cols] = red.lb
        fup[red.cols] = red.ub
        cols = red.cols[self.ints]
        flo[cols] = np.rint(vals[self.ints])
        fup[cols] = np.rint(vals[self.ints])
        try:
            sub = RelaxedModel(p, flo, fup, use_jit=self.use_jit)
        except PresolveInfeasible:
            return False
        res = sub.solve()
        self.lp_iterations += res.iterations
        if res.status != "optimal":
            return False
        x = sub.red.expand(res.x)
        x[cols] = np.rint(vals[self.ints])
        return self.offer(x)

    def offer(self, x_full) -> bool:
        obj = float(self.p.objective @ x_full)
        min_obj = self.model.sign * obj - self.red.obj_offset
        if min_obj < self.inc_min - 1e-12 * max(1.0, abs(min_obj)):
            self.inc_x = x_full
            self.inc_min = min_obj
            log.debug("incumbent %.9g", obj)
            if self.on_incumbent is not None:
                self.on_incumbent(x_full.copy())
            return True
        return False

    def heuristics(self, x, lb, ub, basis) -> bool:
        found = False
        near = lb.copy()
        near[self.ints] = np.clip(np.floor(x[self.ints] + 0.5), lb[self.ints], ub[self.ints])
        found |= self.try_assignment(near)
        score = np.zeros_like(x)
        score[self.ints] = x[self.ints]
        if self.supply_of is not None:
            # rank associations by the rate they actually carry in the relaxation
            src, w = self.supply_of
            score[self.ints] = x[src] * w + 1e-9 * x[self.ints]
        greedy = self.bin_rows.greedy(self.ints, lb, ub, score)
        if greedy is not None:
            found |= self.try_assignment(greedy)
        return found

    def out_of_budget(self, nodes) -> str | None:
        lim = self.params.node_limit
        if lim is not None and nodes >= lim:
            return "node_limit"
        if self.params.time_limit_s is not None and self.clock() - self.t0 > self.params.time_limit_s:
            return "time_limit"
        return None


def branch_and_bound(
    p: MilpProblem,
    params: SolverParams | None = None,
    *,
    incumbent=None,
    node_log=None,
    on_incumbent=None,
    use_jit=None,
    clock=time.monotonic,
) -> MilpSolution:
    """Solve ``p`` to a proven relative gap of ``params.mip_gap``.

    ``incumbent`` is an optional full-length feasible point used as the
    starting incumbent. ``node_log`` is an optional text stream receiving one
    line per node (node, depth, bound, incumbent). ``on_incumbent`` is called
    with a copy of every improving solution, in original variable space.
    """
    params = params or SolverParams()
    try:
        model = RelaxedModel(p, use_jit=use_jit)
    except PresolveInfeasible:
        return MilpSolution(INFEASIBLE, None, np.nan, np.nan, np.inf)
    S = _Search(p, params, model, node_log, clock, use_jit)
    S.on_incumbent = on_incumbent
    red = model.red
    if incumbent is not None:
        _seed_incumbent(S, p, np.asarray(incumbent, dtype=float))

    root = S.solve(red.lb, red.ub, None)
    if root.status == "infeasible":
        return MilpSolution(INFEASIBLE, None, np.nan, np.nan, np.inf, nodes=1, lp_iterations=S.lp_iterations)
    if root.status != "optimal":
        raise ValueError(f"relaxation is {root.status}; the model needs bounded supply and fairness level")
    root_bound = S.caller(root.objective)

    heap: list[_Node] = []
    dive: list[_Node] = []
    seq = 0
    nodes = 0
    pruned_bound = np.inf  # best minimization bound among nodes dropped within the gap
    stop_reason = None
    plunging = False

    def process(node, lb, ub, res):
        """Branch or fathom a solved node; returns True when it produced children."""
        nonlocal seq, plunging
        x = res.x
        xi = x[S.ints]
        frac = np.minimum(xi - np.floor(xi), np.ceil(xi) - xi)
        if S.heuristics(x, lb, ub, res.basis):
            plunging = True
        if frac.size == 0 or frac.max() <= INT_TOL:
            vals = x.copy()
            vals[S.ints] = np.rint(xi)
            S.try_assignment(vals)
            return False
        if S.prunable(res.objective):
            return False
        k = int(np.argmax(frac))  # first index among ties
        j = int(S.ints[k])
        down = node.changes + ((j, lb[j], np.floor(x[j])),)
        up = node.changes + ((j, np.ceil(x[j]), ub[j]),)
        first, second = (up, down) if x[j] - np.floor(x[j]) >= 0.5 else (down, up)
        children = []
        for ch in (first, second):
            seq += 1
            children.append(_Node(res.objective, seq, node.depth + 1, ch, res.basis))
        if plunging:
            dive.append(children[0])
            heapq.heappush(heap, children[1])
        else:
            for c in children:
                heapq.heappush(heap, c)
        return True

    root_node = _Node(root.objective, 0, 0, ())
    nodes = 1
    _log_node(node_log, nodes, 0, root_bound, S)
    if not process(root_node, red.lb.copy(), red.ub.copy(), root):
        heap.clear()

    while heap or dive:
        stop_reason = S.out_of_budget(nodes)
        if stop_reason:
            break
        if dive:
            node = dive.pop()
        else:
            plunging = False
            node = heapq.heappop(heap)
        if S.prunable(node.key):
            pruned_bound = min(pruned_bound, node.key)
            plunging = False
            continue
        lb = red.lb.copy()
        ub = red.ub.copy()
        for j, lo, hi in node.changes:
            lb[j], ub[j] = lo, hi
        res = S.solve(lb, ub, node.basis)
        nodes += 1
        if res.status != "optimal":
            _log_node(node_log, nodes, node.depth, np.nan, S)
            plunging = False
            continue
        _log_node(node_log, nodes, node.depth, S.caller(res.objective), S)
        if S.prunable(res.objective):
            pruned_bound = min(pruned_bound, res.objective)
            plunging = False
            continue
        if not process(node, lb, ub, res):
            plunging = False

    open_min = [n.key for n in heap] + [n.key for n in dive]
    candidates = open_min + ([pruned_bound] if np.isfinite(pruned_bound) else [])
    if S.inc_x is None:
        if stop_reason:
            bound = S.caller(min(candidates)) if candidates else root_bound
            return MilpSolution(TIME_LIMIT, None, np.nan, bound, np.inf, nodes, S.lp_iterations,
                                {"stop": stop_reason, "root_bound": root_bound})
        return MilpSolution(INFEASIBLE, None, np.nan, np.nan, np.inf, nodes, S.lp_iterations)
    best_min = min([S.inc_min] + candidates)
    bound = S.caller(best_min)
    gap = S.gap(best_min, S.inc_min)
    x_full = S.inc_x
    obj_full = float(p.objective @ x_full)
    if gap <= params.mip_gap:
        status = OPTIMAL
    elif stop_reason == "time_limit":
        status = TIME_LIMIT
    else:
        status = FEASIBLE
    return MilpSolution(
        status, x_full, obj_full, bound, gap, nodes, S.lp_iterations,
        {"stop": stop_reason, "root_bound": root_bound},
    )


def _supply_weights(p: MilpProblem, red):
    """For each reduced binary ``a[c,u]``: the reduced index of ``l[c,u]`` and ``r[c,u]``.

    Only models built by ``build_milp`` carry this structure; otherwise None.
    """
    blk = p.blocks or {}
    if not {"a", "l", "rate"} <= set(blk):
        return None
    pos = np.full(red.n_orig, -1, dtype=np.int64)
    pos[red.cols] = np.arange(red.cols.size)
    ints = np.flatnonzero(red.integer)
    a_orig = red.cols[ints]
    a_flat = np.asarray(blk["a"]).ravel()
    l_flat = np.asarray(blk["l"]).ravel()
    r_flat = np.asarray(blk["rate"], dtype=float).ravel()
    where = np.full(red.n_orig, -1, dtype=np.int64)
    where[a_flat] = np.arange(a_flat.size)
    k = where[a_orig]
    if np.any(k < 0):
        return None
    src = pos[l_flat[k]]
    if np.any(src < 0):
        return None
    return src, r_flat[k] / max(float(r_flat.max()), 1.0)


def _seed_incumbent(S: _Search, p: MilpProblem, x):
    if x.shape != (p.n_vars,):
        raise ValueError("incumbent has the wrong length")
    bins = p.binary_mask
    if np.any(np.abs(x[bins] - np.rint(x[bins])) > 1e-9) or p.max_violation(x) > 1e-6:
        log.warning("supplied incumbent is infeasible; ignored")
        return
    x = x.copy()
    x[bins] = np.rint(x[bins])
    S.offer(x)


def _log_node(fh, n, depth, bound, S):
    if fh is None:
        return
    inc = S.caller(S.inc_min) if S.inc_x is not None else float("nan")
    fh.write(f"node {n} depth {depth} bound {bound:.12g} incumbent {inc:.12g}\n")
