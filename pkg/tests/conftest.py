import numpy as np
import pytest

from ca_alloc.model import PREMIUM, STANDARD, Beam, Carrier, LinkParams, Scenario, SolverParams, User
from ca_alloc.presets import CARRIER_BW_HZ, HPBW_DEG, PEAK_GAIN_DBI, _slot_freq

MBPS = 1e6


def make_scenario(rates_mbps, demands_mbps, caps=None, *, prev=None, q=None, **solver):
    """Hand instance on one beam with an explicit rate matrix (Mbit/s, carriers x users)."""
    r = np.asarray(rates_mbps, dtype=float) * MBPS
    n_c, n_u = r.shape
    caps = [1] * n_u if caps is None else list(caps)
    users = [
        User(u, 0, (0.0,), float(demands_mbps[u]) * MBPS, PREMIUM if caps[u] > 1 else STANDARD, caps[u])
        for u in range(n_u)
    ]
    carriers = [Carrier(c, c, 0, CARRIER_BW_HZ, _slot_freq(c)) for c in range(n_c)]
    params = dict(mip_gap=1e-9, time_limit_s=30.0)
    params.update(solver)
    return Scenario(
        beams=[Beam(0, (0.0, 0.0), PEAK_GAIN_DBI, HPBW_DEG, 10.0)],
        carriers=carriers,
        users=users,
        link=LinkParams(),
        solver=SolverParams(swap_budget_q=q, **params),
        prev_association=None if prev is None else np.asarray(prev, dtype=float),
        rate_matrix_override=r,
    )


@pytest.fixture
def scenario_factory():
    return make_scenario


@pytest.fixture(params=[True, False], ids=["jit", "numpy"])
def use_jit(request):
    return request.param
