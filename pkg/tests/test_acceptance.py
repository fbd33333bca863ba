"""Acceptance suite: one PASS/FAIL line per criterion on the terminal.

Run with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from ca_alloc import cli, presets
from ca_alloc.alloc import allocate_baseline_no_ca, allocate_ca, evolve
from ca_alloc.linkbudget import rate_matrix
from ca_alloc.milp import build_milp, decode, linearize_product_rows
from ca_alloc.model import swap_distance
from ca_alloc.solver import branch_and_bound, enumerate_oracle, solve_lp

from conftest import make_scenario

# tolerances and budgets of the acceptance criteria
ORACLE_TOL = 1e-6
ORACLE_BUDGET_S = 300.0
PRODUCT_TOL = 1e-6
CARRIER_TOL = 1e-7
BINARY_TOL = 1e-9
TREND_BUDGET_S = 120.0
DOMINANCE_BUDGET_S = 120.0
UNUSED_TOL_BPS = 1e-3
HAND_TOL = 1e-9
GRID = np.round(np.arange(0, 21) * 0.05, 10)

pytestmark = pytest.mark.slow


@pytest.fixture
def announce(capsys):
    def emit(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  criterion {n}: {title} | {detail}")
        return ok

    return emit


# -- 1 ------------------------------------------------------------------------


def test_c1_oracle_equivalence(announce):
    t0 = time.perf_counter()
    worst = 0.0
    mismatches = []
    for seed in range(200):
        s = presets.tiny(seed)
        p = build_milp(s, rate_matrix(s))
        bb = branch_and_bound(p, s.solver)
        ref = enumerate_oracle(p)
        if bb.status != ref.status:
            mismatches.append((seed, bb.status, ref.status))
            continue
        if ref.x is not None:
            diff = abs(bb.objective - ref.objective)
            worst = max(worst, diff)
            if diff > ORACLE_TOL:
                mismatches.append((seed, bb.objective, ref.objective))
    wall = time.perf_counter() - t0
    ok = not mismatches and wall < ORACLE_BUDGET_S
    announce(1, "branch-and-bound equals exhaustive oracle", ok,
             f"200 tiny instances, max |diff| {worst:.2e}, mismatches {mismatches[:3]}, {wall:.1f} s")
    assert ok


# -- 2 and 3 share the incumbents collected on the test scenarios -------------


def _test_scenarios():
    out = [presets.tiny(seed) for seed in range(60)]
    out.append(make_scenario([[100, 100]], [60, 60]))
    out.append(make_scenario([[100], [100]], [150], caps=[2]))
    out.append(make_scenario([[100, 0], [0, 10]], [50, 20]))
    p8 = presets.paper8(1)
    keep = [u for u in p8.users if u.beam_id < 2]
    out.append(replace(p8, users=keep, carriers=[c for c in p8.carriers if c.beam_id < 2]).with_solver(node_limit=25))
    return out


def _evolution_cases():
    s = presets.evolve2(1)
    idx = list(range(0, 40, 3))
    sub = replace(
        s,
        users=[replace(s.users[i], id=k) for k, i in enumerate(idx)],
        demand_profiles=s.demand_profiles[:, idx],
    ).with_solver(node_limit=200)
    return [(sub, q) for q in range(4)]


@pytest.fixture(scope="module")
def incumbents():
    seen = []

    def hook(s, p, x):
        seen.append((s, p, x))

    for s in _test_scenarios():
        allocate_ca(s, on_incumbent=hook)
    for s, q in _evolution_cases():
        evolve(s, q=q, on_incumbent=hook)
    return seen


def test_c2_linearization_exact(announce, incumbents):
    rows = linearize_product_rows(0, 1, 2)
    wrong = 0
    for a in (0, 1):
        for f in GRID:
            for lam in GRID:
                v = {0: a, 1: f, 2: lam}
                holds = True
                for terms, sense, rhs, _ in rows:
                    act = sum(c * v[j] for j, c in terms)
                    holds &= (act <= rhs + 1e-12) if sense == "<=" else (act >= rhs - 1e-12)
                wrong += holds != bool(abs(lam - a * f) < 1e-12)
    worst = 0.0
    for _, p, x in incumbents:
        m = decode(p, x)
        worst = max(worst, float(np.max(np.abs(m["L"] - m["A"] * m["F"]), initial=0.0)))
    ok = wrong == 0 and worst <= PRODUCT_TOL and len(incumbents) > 0
    announce(2, "product rows admit exactly lambda = a*f", ok,
             f"{2 * GRID.size ** 2} grid points, {wrong} wrong; {len(incumbents)} incumbents, "
             f"max |lambda - a*f| {worst:.2e}")
    assert ok


def test_c3_feasibility(announce, incumbents):
    problems = []
    for s, p, x in incumbents:
        m = decode(p, x)
        A, F = m["A"], m["F"]
        if np.max(np.abs(A - np.rint(A)), initial=0.0) > BINARY_TOL:
            problems.append("non-binary association")
        if np.any(F.sum(axis=1) > 1 + CARRIER_TOL):
            problems.append("carrier over-allocated")
        if np.any(np.rint(A).sum(axis=0) > s.max_carriers):
            problems.append("user above max_carriers")
        q = s.solver.swap_budget_q
        if s.prev_association is not None and q is not None and swap_distance(s.prev_association, A) > q:
            problems.append("swap budget exceeded")
    ok = not problems and len(incumbents) > 0
    announce(3, "every incumbent is feasible", ok,
             f"{len(incumbents)} incumbents checked, problems {sorted(set(problems))}")
    assert ok


# -- 4 ------------------------------------------------------------------------


def test_c4_q_trend(announce):
    s = presets.evolve2(1)
    t0 = time.perf_counter()
    finals = [evolve(s, q=q).final for q in range(5)]
    wall = time.perf_counter() - t0
    psi = [f.psi for f in finals]
    unmet = [f.unmet_bps / 1e6 for f in finals]
    unused = [f.unused_bps / 1e6 for f in finals]

    def nondecreasing(v, tol):
        return all(b >= a - tol for a, b in zip(v, v[1:]))

    psi_ok = nondecreasing(psi, 1e-9)
    trend_ok = nondecreasing([-u for u in unmet], 1e-9) and nondecreasing([-u for u in unused], 1e-9)
    ok = psi_ok and trend_ok and wall < TREND_BUDGET_S
    announce(4, "psi non-decreasing in Q, unmet/unused non-increasing (evolve2 seed 1)", ok,
             "psi " + " ".join(f"{v:.4f}" for v in psi)
             + " | unmet Mbps " + " ".join(f"{v:.1f}" for v in unmet)
             + " | unused Mbps " + " ".join(f"{v:.1f}" for v in unused)
             + f" | {wall:.1f} s")
    assert ok


# -- 5 ------------------------------------------------------------------------


def test_c5_ca_dominates_baseline(announce):
    s = presets.paper8(1)
    t0 = time.perf_counter()
    r = rate_matrix(s)
    ca = allocate_ca(s, rates=r)
    wall = time.perf_counter() - t0
    base = allocate_baseline_no_ca(s, rates=r)
    ok = (
        ca.unmet_bps < base.unmet_bps
        and ca.unused_bps < base.unused_bps
        and ca.unused_bps <= UNUSED_TOL_BPS
        and wall < DOMINANCE_BUDGET_S
    )
    announce(5, "CA beats the no-CA baseline (paper8 seed 1)", ok,
             f"unmet {ca.unmet_bps / 1e6:.1f} vs {base.unmet_bps / 1e6:.1f} Mbps, "
             f"unused {ca.unused_bps:.3g} bit/s vs {base.unused_bps / 1e6:.1f} Mbps, "
             f"status {ca.status} gap {ca.gap:.1e}, {wall:.1f} s")
    assert ok


# -- 6 ------------------------------------------------------------------------


def _hand_errors(use_jit):
    errs = {}
    s = make_scenario([[100, 100]], [60, 60])
    p = build_milp(s, rate_matrix(s))
    sol = branch_and_bound(p, s.solver, use_jit=use_jit)
    m = decode(p, sol.x)
    errs["shared psi"] = abs(sol.objective - 5 / 6)
    errs["shared f"] = float(np.max(np.abs(m["F"] - 0.5)))

    s = make_scenario([[100], [100]], [150], caps=[2])
    p = build_milp(s, rate_matrix(s))
    sol = branch_and_bound(p, s.solver, use_jit=use_jit)
    errs["aggregate psi"] = abs(sol.objective - 1.0)
    # supplies compared in Mbit/s
    errs["aggregate s"] = abs(decode(p, sol.x)["s"][0] / 1e6 - 150.0)

    s = make_scenario([[100]], [50])
    p = build_milp(s, rate_matrix(s))
    lp = solve_lp(p, use_jit=use_jit)
    m = decode(p, lp.x)
    errs["single psi"] = abs(lp.objective - 1.0)
    errs["single s"] = abs(m["s"][0] / 1e6 - 50.0)
    errs["single lambda"] = abs(m["L"][0, 0] - 0.5)
    return errs


def test_c6_hand_fixtures(announce):
    errs = {}
    for use_jit in (True, False):
        for k, v in _hand_errors(use_jit).items():
            errs[k] = max(errs.get(k, 0.0), v)
    worst = max(errs.values())
    ok = worst <= HAND_TOL
    announce(6, "hand-solved fixtures reproduced", ok,
             ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


# -- 7 ------------------------------------------------------------------------


def test_c7_determinism(announce, tmp_path):
    p8 = tmp_path / "p8.json"
    ev = tmp_path / "ev.json"
    assert cli.main(["gen", "--preset", "paper8", "--seed", "1", "-o", str(p8)]) == 0
    assert cli.main(["gen", "--preset", "evolve2", "--seed", "1", "-o", str(ev)]) == 0
    files = {}
    for run in ("a", "b"):
        sol = tmp_path / f"solve_{run}.json"
        tab = tmp_path / f"sweep_{run}.csv"
        cli.main(["solve", str(p8), "--node-limit", "10", "-o", str(sol)])
        cli.main(["sweep-q", str(ev), "--q", "0,1,2,3,4", "--node-limit", "100", "-o", str(tab)])
        files[run] = (sol.read_bytes(), tab.read_bytes())
    same_solve = files["a"][0] == files["b"][0]
    same_sweep = files["a"][1] == files["b"][1]
    ok = same_solve and same_sweep
    announce(7, "solve and sweep-q outputs are byte-identical", ok,
             f"solve identical {same_solve} ({len(files['a'][0])} bytes), "
             f"sweep-q identical {same_sweep} ({len(files['a'][1])} bytes)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
