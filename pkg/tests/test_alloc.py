import json

import numpy as np
import pytest
from dataclasses import replace

from ca_alloc import presets
from ca_alloc.alloc import (
    AllocationResult,
    ValidationError,
    allocate_baseline_no_ca,
    allocate_ca,
    compute_metrics,
    evolve,
    result_json,
)
from ca_alloc.model import User

from conftest import make_scenario

MBPS = 1e6


def test_premium_aggregation():
    s = make_scenario([[100], [100]], [150], caps=[2])
    res = allocate_ca(s)
    assert res.psi == pytest.approx(1.0, abs=1e-9)
    assert res.unmet_bps == pytest.approx(0.0, abs=1e-3)
    assert res.unused_bps == pytest.approx(0.0, abs=1e-3)
    assert res.A.sum() == 2


def test_all_zero_demand():
    s = make_scenario([[100, 100]], [0, 0])
    res = allocate_ca(s)
    assert res.psi == 1.0
    assert not res.A.any() and not res.F.any() and not res.L.any()
    assert res.unmet_bps == 0 and res.unused_bps == 0


def test_phase2_fills_spare_capacity():
    # user 1 limits psi; user 0 can still be topped up to its full demand
    s = make_scenario([[100, 0], [0, 10]], [50, 20])
    res = allocate_ca(s)
    assert res.psi == pytest.approx(0.5, abs=1e-9)
    assert res.supply_bps[0] == pytest.approx(50e6, rel=1e-9)
    one = allocate_ca(s.with_solver(lexicographic_phase2=False))
    assert one.psi == pytest.approx(res.psi, abs=1e-9)
    assert res.unmet_bps <= one.unmet_bps + 1e-6


def test_oversupply_flag():
    s = make_scenario([[100]], [40])
    assert allocate_ca(s).unused_bps <= 1e-3
    loose = allocate_ca(s.with_solver(no_oversupply=False))
    assert loose.psi == pytest.approx(2.5, abs=1e-9)


def test_invalid_scenario_raises():
    s = make_scenario([[100]], [40])
    bad = replace(s, users=[User(0, 0, (0.0,), 40e6, "standard", 2)])
    with pytest.raises(ValidationError) as err:
        allocate_ca(bad)
    assert any("max_carriers" in m for m in err.value.problems)


def test_baseline_equal_rates():
    s = make_scenario([[100, 100]], [60, 40])
    res = allocate_baseline_no_ca(s)
    np.testing.assert_allclose(res.F, [[0.6, 0.4]])
    np.testing.assert_allclose(res.supply_bps, [60e6, 40e6])
    assert res.unmet_bps == pytest.approx(0) and res.unused_bps == pytest.approx(0)


def test_baseline_unequal_rates():
    s = make_scenario([[100, 50]], [60, 60])
    res = allocate_baseline_no_ca(s)
    np.testing.assert_allclose(res.F, [[0.5, 0.5]])
    np.testing.assert_allclose(res.supply_bps, [50e6, 25e6])
    assert res.unmet_bps == pytest.approx(45e6)


def test_baseline_saturation():
    s = make_scenario([[80]], [100])
    res = allocate_baseline_no_ca(s)
    assert res.F[0, 0] == 1.0
    assert res.supply_bps[0] == 80e6 and res.unmet_bps == pytest.approx(20e6)


def test_baseline_picks_best_rate_and_warns():
    s = make_scenario([[50, 0], [90, 0]], [10, 10])
    res = allocate_baseline_no_ca(s)
    np.testing.assert_array_equal(res.A, [[0, 0], [1, 0]])
    assert res.warnings and "user 1" in res.warnings[0]


@pytest.mark.parametrize(
    "d, s, expected",
    [
        ([100, 50], [80, 60], (20, 10, 0.8)),
        ([30, 40], [30, 40], (0, 0, 1.0)),
        ([0, 10], [5, 10], (0, 5, 1.0)),
    ],
)
def test_metrics(d, s, expected):
    unmet, unused, ratio = compute_metrics(np.array(d) * MBPS, np.array(s) * MBPS)
    assert unmet == pytest.approx(expected[0] * MBPS)
    assert unused == pytest.approx(expected[1] * MBPS)
    assert ratio == pytest.approx(expected[2])


def test_metrics_no_demand():
    assert compute_metrics([0, 0], [1, 0])[2] == float("inf")
    with pytest.raises(ValueError):
        compute_metrics([1], [1, 2])


def _evo_scenario():
    base = make_scenario([[200, 40, 120], [60, 180, 90]], [50, 50, 50], caps=[2, 2, 1])
    return replace(base, demand_profiles=np.array([[150, 20, 60], [20, 170, 60], [90, 90, 10]]) * MBPS)


def test_evolve_q0_freezes_association():
    tr = evolve(_evo_scenario(), q=0)
    assert len(tr.results) == 3 and tr.error is None
    assert tr.swap_counts[0] is None
    assert tr.swap_counts[1:] == [0, 0]
    for r in tr.results[1:]:
        np.testing.assert_array_equal(r.A, tr.results[0].A)


def test_evolve_large_q_is_unconstrained():
    s = _evo_scenario()
    big = evolve(s, q=2 * 2 * 3)
    free = evolve(s, q=None)
    for a, b in zip(big.results, free.results):
        assert a.psi == pytest.approx(b.psi, abs=1e-9)


def test_evolve_q_monotone():
    s = _evo_scenario()
    finals = [evolve(s, q=q).final.psi for q in range(5)]
    assert all(b >= a - 1e-9 for a, b in zip(finals, finals[1:]))


def test_evolve_errors():
    s = _evo_scenario()
    with pytest.raises(ValueError):
        evolve(replace(s, demand_profiles=None))
    with pytest.raises(ValueError):
        evolve(s, q=-1)
    with pytest.raises(ValueError):
        evolve(s, demand_profiles=np.ones((2, 5)))


def test_result_round_trip():
    s = make_scenario([[100, 100]], [60, 60])
    res = allocate_ca(s)
    doc = json.loads(result_json(res))
    assert doc["type"] == "allocation" and doc["schema"] == 1
    back = AllocationResult.from_dict(doc)
    np.testing.assert_array_equal(back.A, res.A)
    assert back.psi == res.psi and back.status == res.status
    assert result_json(back) == result_json(res)


def test_trace_json():
    tr = evolve(_evo_scenario(), q=1)
    doc = tr.to_dict()
    assert doc["type"] == "evolution" and doc["q"] == 1
    assert len(doc["epochs"]) == 3
    json.dumps(doc, allow_nan=False)


def test_paper8_small_preset_solves():
    # a reduced instance of the shipped preset keeps this test fast
    s = presets.paper8(3)
    keep = [u for u in s.users if u.beam_id < 2][:20]
    carriers = [c for c in s.carriers if c.beam_id < 2]
    small = replace(s, users=keep, carriers=carriers).with_solver(node_limit=20)
    ca = allocate_ca(small)
    base = allocate_baseline_no_ca(small)
    assert ca.unused_bps <= 1e-3
    assert ca.unmet_bps <= base.unmet_bps + 1e-6
    assert ca.psi >= base.psi - 1e-9
