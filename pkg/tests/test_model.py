import json

import numpy as np
import pytest
from dataclasses import replace

from ca_alloc import presets
from ca_alloc.model import (
    PREMIUM,
    STANDARD,
    SchemaError,
    User,
    load_scenario,
    parse_scenario,
    save_scenario,
    serialize_scenario,
    swap_distance,
    validate_scenario,
)

from conftest import make_scenario


def test_well_formed_is_valid():
    s = make_scenario([[100, 100], [80, 0]], [50, 60], caps=[2, 1])
    assert validate_scenario(s) == []


def test_standard_user_cap():
    s = make_scenario([[100]], [50])
    bad = replace(s, users=[User(0, 0, (0.0,), 50e6, STANDARD, 2)])
    assert any("standard SLA must have max_carriers=1" in m for m in validate_scenario(bad))


def test_premium_cap_above_delta_max():
    s = make_scenario([[100]], [50])
    bad = replace(s, users=[User(0, 0, (0.0,), 50e6, PREMIUM, 3)])
    assert any("delta_max" in m for m in validate_scenario(bad))


def test_prev_association_must_be_binary():
    s = make_scenario([[100, 100]], [50, 50], prev=[[0.5, 0]])
    assert any("association must be binary" in m for m in validate_scenario(s))


def test_prev_association_shape():
    s = make_scenario([[100, 100]], [50, 50], prev=[[1, 0, 0]])
    assert any("shape" in m for m in validate_scenario(s))


def test_negative_demand_and_bad_rates():
    s = make_scenario([[100]], [50])
    s = replace(s, users=[User(0, 0, (0.0,), -1.0)], rate_matrix_override=np.array([[-1.0]]))
    msgs = validate_scenario(s)
    assert any("demand_bps" in m for m in msgs)
    assert any("rate_matrix_override" in m for m in msgs)


def test_duplicate_ids():
    s = make_scenario([[100, 100]], [5, 5])
    s = replace(s, users=[User(0, 0, (0.0,), 1.0), User(0, 0, (0.0,), 1.0)])
    assert any("duplicate" in m for m in validate_scenario(s))


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([[1, 0], [0, 1]], [[0, 1], [0, 1]], 2),
        ([[1, 0], [0, 1]], [[1, 0], [0, 1]], 0),
        (np.zeros((2, 2)), np.ones((2, 2)), 4),
    ],
)
def test_swap_distance(a, b, expected):
    assert swap_distance(a, b) == expected


def test_swap_distance_shape_mismatch():
    with pytest.raises(ValueError):
        swap_distance(np.zeros((2, 2)), np.zeros((2, 3)))


@pytest.mark.parametrize("preset", presets.PRESETS)
def test_round_trip(preset, tmp_path):
    s = presets.generate(preset, 4)
    text = serialize_scenario(s)
    back = parse_scenario(text)
    assert back == s
    assert serialize_scenario(back) == text
    path = tmp_path / "s.json"
    save_scenario(s, path)
    assert load_scenario(path) == s


def test_schema_version_checked():
    doc = json.loads(serialize_scenario(presets.tiny(1)))
    doc["schema"] = 99
    with pytest.raises(SchemaError):
        parse_scenario(json.dumps(doc))


def test_paper8_shape():
    s = presets.paper8(1)
    assert s.n_carriers == 16
    assert 240 <= s.n_users <= 280
    assert validate_scenario(s) == []
    counts = np.bincount([u.beam_id for u in s.users])
    assert counts.min() >= 30 and counts.max() <= 35
    high = sum(u.demand_bps >= 100e6 for u in s.users)
    assert high == round(0.05 * s.n_users)
    assert s.delta_max == 2
    assert {c.bandwidth_hz for c in s.carriers} == {54e6}


def test_evolve2_shape():
    s = presets.evolve2(1)
    assert len(s.beams) == 2 and s.n_users == 40
    assert s.demand_profiles.shape == (2, 40)
    assert validate_scenario(s) == []


def test_tiny_bounds():
    for seed in range(30):
        s = presets.tiny(seed)
        assert s.n_carriers <= 4 and s.n_users <= 4
        assert validate_scenario(s) == []


def test_gen_deterministic():
    assert serialize_scenario(presets.paper8(1)) == serialize_scenario(presets.paper8(1))
    assert serialize_scenario(presets.paper8(1)) != serialize_scenario(presets.paper8(2))


def test_unknown_preset():
    with pytest.raises(ValueError):
        presets.generate("nope", 1)
