"""Compare the numba kernels with their numpy twins.

Times each inner-loop kernel on synthetic inputs of simplex-like size, then
full LP relaxations and a short branch-and-bound run with either backend.

    python benchmarks/bench_kernels.py [--repeat N]

The library default follows CA_ALLOC_DISABLE_JIT; here both backends are
selected explicitly so one process measures both.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ca_alloc import presets
from ca_alloc.linkbudget import rate_matrix
from ca_alloc.milp import build_milp
from ca_alloc.solver import branch_and_bound, solve_lp
from ca_alloc.solver import kernels as K
from ca_alloc.solver.lp import RelaxedModel
from ca_alloc.solver.kernels import AT_LOWER, AT_UPPER


def best_of(fn, repeat):
    fn()  # warm-up, includes compilation for the jit side
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rng):
    m, n = 2500, 7500
    x = rng.normal(size=m)
    lo, up = np.zeros(m), np.ones(m)
    w = rng.random(m) + 0.5
    head = np.arange(m, dtype=np.int64)
    alpha = rng.normal(size=n) * (rng.random(n) < 0.05)
    d = np.abs(rng.normal(size=n))
    status = rng.choice([AT_LOWER, AT_UPPER], size=n).astype(np.int64)
    d[status == AT_UPPER] *= -1
    clo, cup = np.zeros(n), np.ones(n)
    # 60 eta columns of ~1% density
    eta_r = rng.integers(0, m, size=60).astype(np.int64)
    idx, val, ptr = [], [], [0]
    for r in eta_r:
        nz = np.unique(np.append(rng.choice(m, size=25, replace=False), r))
        v = rng.normal(size=nz.size)
        v[nz == r] = 1.0 + rng.random()
        idx.append(nz)
        val.append(v)
        ptr.append(ptr[-1] + nz.size)
    etas = (eta_r, np.array(ptr, dtype=np.int64), np.concatenate(idx).astype(np.int64), np.concatenate(val))
    alpha_q = rng.normal(size=m) * (rng.random(m) < 0.1)
    alpha_q[7] = 1.5
    tau = rng.normal(size=m)
    # an optimal basis of the paper8 relaxation, as the simplex would factor it
    s = presets.paper8(1)
    model = RelaxedModel(build_milp(s, rate_matrix(s)))
    B = model.engine._basis_matrix(model.solve().basis.head).tocsc()
    lu = spla.splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
    L, U = lu.L.tocsc(), lu.U.tocsc()
    tri = (
        L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data, L.diagonal(),
        U.indptr.astype(np.int64), U.indices.astype(np.int64), U.data, U.diagonal(),
        lu.perm_r.astype(np.int64), lu.perm_c.astype(np.int64),
    )
    A = sp.random(400, 1200, density=0.01, random_state=rng).tocsc()
    A.data[:] = 1.0
    order = rng.permutation(1200).astype(np.int64)
    gargs = (order, A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, np.zeros(1200), np.ones(1200))
    rhi = np.full(400, 2.0)
    rlo = np.full(400, -np.inf)
    b = rng.normal(size=m)
    bb = rng.normal(size=B.shape[0])

    return {
        "leaving": lambda k: k.leaving(x, lo, up, w, 1e-7, False, head),
        "ratio": lambda k: k.ratio(alpha, d, status, clo, cup, 1.0, 3.0, 1e-9, False, 1e-7),
        "ftran_eta": lambda k: k.ftran_eta(b.copy(), *etas),
        "btran_eta": lambda k: k.btran_eta(b.copy(), *etas),
        "dse": lambda k: k.dse(w.copy(), alpha_q, tau, 7, 1.0),
        "lu_solve": lambda k: k.lu_solve(bb, False, *tri) if k.lu_solve else lu.solve(bb),
        "greedy_fix": lambda k: k.greedy_fix(*gargs, np.zeros(400), A.sum(axis=1).A1, rlo, rhi, np.zeros(1200)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'kernel':<14}{'numba [us]':>12}{'numpy [us]':>12}{'speedup':>9}")
    for name, fn in kernel_cases(rng).items():
        tj = best_of(lambda: fn(K.jit_kernels), args.repeat)
        tn = best_of(lambda: fn(K.numpy_kernels), args.repeat)
        print(f"{name:<14}{tj * 1e6:>12.1f}{tn * 1e6:>12.1f}{tn / tj:>9.1f}")

    print()
    print(f"{'solve':<28}{'numba [s]':>11}{'numpy [s]':>11}{'speedup':>9}")
    cases = [
        ("tiny x50 LP", [build_milp(s, rate_matrix(s)) for s in map(presets.tiny, range(50))]),
        ("evolve2 LP", [build_milp(presets.evolve2(1), rate_matrix(presets.evolve2(1)))]),
        ("paper8 LP", [build_milp(presets.paper8(1), rate_matrix(presets.paper8(1)))]),
    ]
    for label, models in cases:
        tj = best_of(lambda: [solve_lp(p, use_jit=True) for p in models], 1)
        tn = best_of(lambda: [solve_lp(p, use_jit=False) for p in models], 1)
        print(f"{label:<28}{tj:>11.3f}{tn:>11.3f}{tn / tj:>9.2f}")
    s = presets.evolve2(1).with_solver(node_limit=40)
    p = build_milp(s, rate_matrix(s))
    tj = best_of(lambda: branch_and_bound(p, s.solver, use_jit=True), 1)
    tn = best_of(lambda: branch_and_bound(p, s.solver, use_jit=False), 1)
    print(f"{'evolve2 B&B, 40 nodes':<28}{tj:>11.3f}{tn:>11.3f}{tn / tj:>9.2f}")


if __name__ == "__main__":
    main()
