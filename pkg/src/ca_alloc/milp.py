"""Mixed-integer linear model of max-min demand matching with carrier aggregation.

Variables come in blocks: association ``a`` (binary), fill rate ``f``, the
product ``l = a*f``, per-user supply ``s`` and the fairness level ``psi``.
Within each N_C x N_U block the order is carrier-major.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import Scenario

BINARY = "binary"
CONTINUOUS = "continuous"

LE, EQ, GE = "<=", "=", ">="


@dataclass(frozen=True, eq=False)
class MilpProblem:
    """Solver-agnostic linear model, maximization by convention."""

    names: tuple[str, ...]
    lb: np.ndarray
    ub: np.ndarray
    integrality: tuple[str, ...]
    A: sp.csr_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    row_names: tuple[str, ...]
    objective: np.ndarray
    index_map: dict
    blocks: dict
    sense: str = "max"

    def __post_init__(self):
        for arr in (self.lb, self.ub, self.rhs, self.objective):
            arr.setflags(write=False)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def binary_mask(self) -> np.ndarray:
        return np.array([k == BINARY for k in self.integrality], dtype=bool)

    def block(self, kind: str):
        """Variable indices of an N_C x N_U block (``a``, ``f``, ``l``), the ``s`` vector or ``psi``.

        ``rate`` holds the rate matrix the model was built from.
        """
        return self.blocks[kind]

    def with_bounds(self, lb=None, ub=None) -> "MilpProblem":
        return MilpProblem(
            self.names,
            np.array(self.lb if lb is None else lb, dtype=float),
            np.array(self.ub if ub is None else ub, dtype=float),
            self.integrality,
            self.A,
            self.senses,
            np.array(self.rhs),
            self.row_names,
            np.array(self.objective),
            self.index_map,
            self.blocks,
            self.sense,
        )

    def with_rows(self, rows, senses, rhs, names) -> "MilpProblem":
        """Append linear rows given as a dense or sparse coefficient block."""
        extra = sp.csr_matrix(rows, shape=(len(senses), self.n_vars))
        return MilpProblem(
            self.names,
            np.array(self.lb),
            np.array(self.ub),
            self.integrality,
            sp.vstack([self.A, extra], format="csr"),
            self.senses + tuple(senses),
            np.concatenate([self.rhs, np.asarray(rhs, dtype=float)]),
            self.row_names + tuple(names),
            np.array(self.objective),
            self.index_map,
            self.blocks,
            self.sense,
        )

    def with_objective(self, objective) -> "MilpProblem":
        return MilpProblem(
            self.names, np.array(self.lb), np.array(self.ub), self.integrality, self.A,
            self.senses, np.array(self.rhs), self.row_names,
            np.asarray(objective, dtype=float).copy(), self.index_map, self.blocks, self.sense,
        )

    def row_activity(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float)

    def max_violation(self, x) -> float:
        """Largest absolute bound or row violation at ``x``."""
        x = np.asarray(x, dtype=float)
        act = self.row_activity(x)
        v = 0.0
        for i, (sense, b) in enumerate(zip(self.senses, self.rhs)):
            if sense == LE:
                v = max(v, act[i] - b)
            elif sense == GE:
                v = max(v, b - act[i])
            else:
                v = max(v, abs(act[i] - b))
        v = max(v, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        return v


class _Builder:
    def __init__(self):
        self.names, self.lb, self.ub, self.kind = [], [], [], []
        self.rows, self.cols, self.vals = [], [], []
        self.senses, self.rhs, self.row_names = [], [], []

    def var(self, name, lb, ub, kind=CONTINUOUS) -> int:
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.kind.append(kind)
        return len(self.names) - 1

    def row(self, terms, sense, rhs, name):
        i = len(self.senses)
        for j, v in terms:
            if v != 0.0:
                self.rows.append(i)
                self.cols.append(j)
                self.vals.append(float(v))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name)


def linearize_product_rows(a: int, f: int, lam: int):
    """Four rows that pin ``lam == a*f`` for binary ``a`` and ``f`` in [0, 1].

    Each row is ``(terms, sense, rhs, tag)`` with ``terms`` a list of
    ``(variable, coefficient)`` pairs.
    """
    return [
        ([(lam, 1.0), (a, -1.0)], LE, 0.0, "N1"),
        ([(lam, 1.0)], GE, 0.0, "N2"),
        ([(lam, 1.0), (f, -1.0)], LE, 0.0, "N3"),
        ([(lam, 1.0), (f, -1.0), (a, -1.0)], GE, -1.0, "N4"),
    ]


def linearize_swap_budget(prev, q, a_index):
    """One row bounding the L1 distance between the association and ``prev``.

    ``|a - p|`` equals ``a`` where ``p == 0`` and ``1 - a`` where ``p == 1``,
    so the budget becomes ``sum_{p=0} a - sum_{p=1} a <= q - count(p == 1)``.
    """
    prev = np.asarray(prev)
    a_index = np.asarray(a_index)
    if prev.shape != a_index.shape:
        raise ValueError("previous association and variable map disagree in shape")
    terms = [
        (int(j), -1.0 if p == 1 else 1.0)
        for j, p in zip(a_index.ravel(), np.rint(prev).astype(int).ravel())
    ]
    return terms, LE, float(q) - float(np.rint(prev).sum()), "C7"


def build_milp(s: Scenario, r, *, swap_budget_q="scenario", prev_association="scenario") -> MilpProblem:
    """Assemble the max-min model for scenario ``s`` with rate matrix ``r``.

    ``swap_budget_q`` and ``prev_association`` default to the scenario's own
    values; pass ``None`` explicitly to drop the swap budget.
    """
    r = np.asarray(r, dtype=float)
    n_c, n_u = s.shape
    if r.shape != (n_c, n_u):
        raise ValueError(f"rate matrix shape {r.shape} does not match scenario {(n_c, n_u)}")
    if np.any(r < 0):
        raise ValueError("rate matrix must be nonnegative")
    q = s.solver.swap_budget_q if swap_budget_q == "scenario" else swap_budget_q
    prev = s.prev_association if isinstance(prev_association, str) else prev_association
    d = s.demands
    cap = s.max_carriers
    no_over = s.solver.no_oversupply

    b = _Builder()
    a_idx = np.empty((n_c, n_u), dtype=np.int64)
    f_idx = np.empty_like(a_idx)
    l_idx = np.empty_like(a_idx)
    for c in range(n_c):
        for u in range(n_u):
            a_idx[c, u] = b.var(f"a_{c}_{u}", 0.0, 1.0 if r[c, u] > 0 else 0.0, BINARY)
    for c in range(n_c):
        for u in range(n_u):
            f_idx[c, u] = b.var(f"f_{c}_{u}", 0.0, 1.0)
    for c in range(n_c):
        for u in range(n_u):
            l_idx[c, u] = b.var(f"l_{c}_{u}", 0.0, 1.0)
    s_idx = np.array(
        [b.var(f"s_{u}", 0.0, d[u] if no_over else np.inf) for u in range(n_u)], dtype=np.int64
    )
    psi = b.var("psi", 0.0, 1.0 if no_over else np.inf)

    for u in range(n_u):
        b.row([(s_idx[u], 1.0)] + [(l_idx[c, u], -r[c, u]) for c in range(n_c)], EQ, 0.0, f"C1_{u}")
    for u in range(n_u):
        if d[u] > 0:
            b.row([(s_idx[u], 1.0), (psi, -d[u])], GE, 0.0, f"C2_{u}")
    for u in range(n_u):
        b.row([(a_idx[c, u], 1.0) for c in range(n_c)], LE, float(cap[u]), f"C3_{u}")
    for c in range(n_c):
        b.row([(f_idx[c, u], 1.0) for u in range(n_u)], LE, 1.0, f"C4_{c}")
    if prev is not None and q is not None:
        terms, sense, rhs, _ = linearize_swap_budget(prev, q, a_idx)
        b.row(terms, sense, rhs, "C7")
    for c in range(n_c):
        for u in range(n_u):
            for terms, sense, rhs, tag in linearize_product_rows(a_idx[c, u], f_idx[c, u], l_idx[c, u]):
                b.row(terms, sense, rhs, f"{tag}_{c}_{u}")

    n = len(b.names)
    A = sp.csr_matrix((b.vals, (b.rows, b.cols)), shape=(len(b.senses), n))
    A.sort_indices()
    obj = np.zeros(n)
    obj[psi] = 1.0

    index_map = {}
    for c in range(n_c):
        for u in range(n_u):
            index_map[("a", c, u)] = int(a_idx[c, u])
            index_map[("f", c, u)] = int(f_idx[c, u])
            index_map[("l", c, u)] = int(l_idx[c, u])
    for u in range(n_u):
        index_map[("s", None, u)] = int(s_idx[u])
    index_map[("psi", None, None)] = psi

    return MilpProblem(
        names=tuple(b.names),
        lb=np.array(b.lb, dtype=float),
        ub=np.array(b.ub, dtype=float),
        integrality=tuple(b.kind),
        A=A,
        senses=tuple(b.senses),
        rhs=np.array(b.rhs, dtype=float),
        row_names=tuple(b.row_names),
        objective=obj,
        index_map=index_map,
        blocks={"a": a_idx, "f": f_idx, "l": l_idx, "s": s_idx, "psi": psi, "rate": r.copy()},
    )


def decode(p: MilpProblem, x) -> dict:
    """Split a flat solution vector into named matrices."""
    x = np.asarray(x, dtype=float)
    blk = p.blocks
    return {
        "A": x[blk["a"]],
        "F": x[blk["f"]],
        "L": x[blk["l"]],
        "s": x[blk["s"]],
        "psi": float(x[blk["psi"]]),
    }


# ------------------------------------------------------------------ LP export


def _fmt(v: float) -> str:
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def write_lp(p: MilpProblem, fh=None) -> str:
    """Render the model in CPLEX LP text format; returns the text."""
    out = io.StringIO()
    w = out.write
    w("\\ carrier aggregation max-min model\n")
    w("Maximize\n" if p.sense == "max" else "Minimize\n")
    terms = [(p.objective[j], p.names[j]) for j in np.flatnonzero(p.objective)]
    w(" obj: " + _expr(terms) + "\n")
    w("Subject To\n")
    A = p.A.tocsr()
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for i in range(p.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        row = [(A.data[k], p.names[A.indices[k]]) for k in range(lo, hi)]
        lhs = _expr(row) if row else "0 " + p.names[0]
        w(f" {p.row_names[i]}: {lhs} {op[p.senses[i]]} {_fmt(p.rhs[i])}\n")
    w("Bounds\n")
    for j, name in enumerate(p.names):
        lo, hi = p.lb[j], p.ub[j]
        if lo == hi:
            w(f" {name} = {_fmt(lo)}\n")
        elif np.isinf(hi):
            w(f" {name} >= {_fmt(lo)}\n")
        else:
            w(f" {_fmt(lo)} <= {name} <= {_fmt(hi)}\n")
    binaries = [n for n, k in zip(p.names, p.integrality) if k == BINARY]
    if binaries:
        w("Binary\n")
        for k in range(0, len(binaries), 8):
            w(" " + " ".join(binaries[k : k + 8]) + "\n")
    w("End\n")
    text = out.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def _expr(terms) -> str:
    parts = []
    for k, (v, name) in enumerate(terms):
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        coef = "" if mag == 1 else _fmt(mag) + " "
        if k == 0:
            parts.append(("- " if v < 0 else "") + coef + name)
        else:
            parts.append(f"{sign} {coef}{name}")
    return " ".join(parts)
