"""Seeded scenario generators.

``paper8``  eight-beam cluster, two carriers per beam, 30-35 users per beam.
``evolve2`` two beams of twenty users with two demand profiles.
``tiny``    at most four carriers and four users, small enough for exhaustive checks.
"""
from __future__ import annotations

import numpy as np

from .model import (
    PREMIUM,
    STANDARD,
    Beam,
    Carrier,
    LinkParams,
    Scenario,
    SolverParams,
    User,
)

MBPS = 1e6
CARRIER_BW_HZ = 54e6
DOWNLINK_HZ = 19.5e9
TX_POWER_W = 10.0
DELTA_MAX = 2
HIGH_DEMAND_MBPS = (100.0, 200.0)
LOW_DEMAND_MBPS = (5.0, 30.0)
HIGH_DEMAND_SHARE = 0.05
# evolve2 runs near full load so the swap budget visibly matters
EVOLVE_HIGH_MBPS = (80.0, 160.0)
EVOLVE_LOW_MBPS = (4.0, 24.0)

HPBW_DEG = 0.45
PEAK_GAIN_DBI = 54.0
# hexagonal spacing that puts neighbouring -3 dB contours edge to edge
BEAM_SPACING_DEG = HPBW_DEG * np.sqrt(3) / 2

# Co-channel partner of each (beam, carrier slot): carriers sharing a
# frequency always sit in beams at least two cells apart, and the two
# carriers of a beam face partners in different directions.
PAPER8_FREQ_SLOTS = ((5, 3), (0, 7), (6, 1), (2, 4), (1, 2), (3, 4), (7, 5), (6, 0))

PRESETS = ("paper8", "evolve2", "tiny")


def _hex_cluster(n_cols: int, n_rows: int) -> list[tuple[float, float]]:
    out = []
    for row in range(n_rows):
        for col in range(n_cols):
            out.append(((col + 0.5 * row) * BEAM_SPACING_DEG, row * BEAM_SPACING_DEG * np.sqrt(3) / 2))
    return out


def _slot_freq(slot: int) -> float:
    return DOWNLINK_HZ + (slot - 3.5) * CARRIER_BW_HZ


def _place_users(rng, beams, beam_id, count):
    """Uniform points inside the -3 dB footprint of ``beam_id``; returns off-axis angles."""
    cx, cy = beams[beam_id].boresight_deg
    radius = beams[beam_id].hpbw_deg / 2
    rad = radius * np.sqrt(rng.random(count))
    ang = rng.random(count) * 2 * np.pi
    px = cx + rad * np.cos(ang)
    py = cy + rad * np.sin(ang)
    centers = np.array([b.boresight_deg for b in beams])
    return np.hypot(px[:, None] - centers[:, 0], py[:, None] - centers[:, 1])


def _demands(rng, n_users, n_high):
    d = rng.uniform(*LOW_DEMAND_MBPS, size=n_users)
    high = np.sort(rng.choice(n_users, size=n_high, replace=False)) if n_high else np.array([], int)
    d[high] = rng.uniform(*HIGH_DEMAND_MBPS, size=n_high)
    return np.round(d * MBPS, 0), high


def _users(beam_ids, offaxis, demands, premium_mask):
    users = []
    for u, (b, pos, d, prem) in enumerate(zip(beam_ids, offaxis, demands, premium_mask)):
        users.append(
            User(
                id=u,
                beam_id=int(b),
                position=tuple(round(float(a), 9) for a in pos),
                demand_bps=float(d),
                sla=PREMIUM if prem else STANDARD,
                max_carriers=DELTA_MAX if prem else 1,
            )
        )
    return users


def paper8(seed: int) -> Scenario:
    rng = np.random.default_rng(seed)
    beams = [
        Beam(i, c, PEAK_GAIN_DBI, HPBW_DEG, TX_POWER_W) for i, c in enumerate(_hex_cluster(4, 2))
    ]
    carriers = []
    for b in range(len(beams)):
        for k in range(2):
            cid = len(carriers)
            carriers.append(Carrier(cid, cid, b, CARRIER_BW_HZ, _slot_freq(PAPER8_FREQ_SLOTS[b][k])))
    counts = rng.integers(30, 36, size=len(beams))
    beam_ids = np.repeat(np.arange(len(beams)), counts)
    offaxis = np.vstack([_place_users(rng, beams, b, c) for b, c in enumerate(counts)])
    n_u = len(beam_ids)
    demands, high = _demands(rng, n_u, int(round(HIGH_DEMAND_SHARE * n_u)))
    premium = np.zeros(n_u, bool)
    premium[high] = True
    premium |= rng.random(n_u) < 0.2
    return Scenario(
        beams=beams,
        carriers=carriers,
        users=_users(beam_ids, offaxis, demands, premium),
        link=LinkParams(downlink_freq_hz=DOWNLINK_HZ),
        solver=SolverParams(mip_gap=1e-4, time_limit_s=50.0, node_limit=60),
        delta_max=DELTA_MAX,
    )


def evolve2(seed: int) -> Scenario:
    """Two beams, twenty users each; users 0-9 start high, then 4-9 drop and 10-14 rise."""
    rng = np.random.default_rng(seed)
    beams = [Beam(i, c, PEAK_GAIN_DBI, HPBW_DEG, TX_POWER_W) for i, c in enumerate(_hex_cluster(2, 1))]
    carriers = [
        Carrier(0, 0, 0, CARRIER_BW_HZ, _slot_freq(0)),
        Carrier(1, 0, 0, CARRIER_BW_HZ, _slot_freq(1)),
        Carrier(2, 1, 1, CARRIER_BW_HZ, _slot_freq(2)),
        Carrier(3, 1, 1, CARRIER_BW_HZ, _slot_freq(3)),
    ]
    per_beam = 20
    beam_ids = np.repeat([0, 1], per_beam)
    offaxis = np.vstack([_place_users(rng, beams, b, per_beam) for b in range(2)])
    n_u = 2 * per_beam
    low = rng.uniform(*EVOLVE_LOW_MBPS, size=(2, n_u))
    high = rng.uniform(*EVOLVE_HIGH_MBPS, size=(2, n_u))
    p1 = low[0].copy()
    p1[:10] = high[0, :10]
    p2 = low[1].copy()
    p2[:4] = p1[:4]
    p2[10:15] = high[1, 10:15]
    profiles = np.round(np.vstack([p1, p2]) * MBPS, 0)
    premium = np.zeros(n_u, bool)
    premium[:15] = True
    return Scenario(
        beams=beams,
        carriers=carriers,
        users=_users(beam_ids, offaxis, profiles[0], premium),
        link=LinkParams(downlink_freq_hz=DOWNLINK_HZ),
        # the node cap keeps the sweep deterministic; the time limit is only a backstop
        solver=SolverParams(mip_gap=1e-6, time_limit_s=120.0, node_limit=1500),
        delta_max=DELTA_MAX,
        demand_profiles=profiles,
    )


def tiny(seed: int, *, with_prev: bool | None = None) -> Scenario:
    """Random small instance with an explicit rate matrix.

    Mixed SLAs, some ineligible pairs, and (half of the time) a previous
    association with a swap budget in 0..4.
    """
    rng = np.random.default_rng(seed)
    n_c = int(rng.integers(1, 5))
    n_u = int(rng.integers(1, 5))
    n_b = 1 if n_c == 1 else 2
    beams = [Beam(i, (i * BEAM_SPACING_DEG, 0.0), PEAK_GAIN_DBI, HPBW_DEG, TX_POWER_W) for i in range(n_b)]
    carriers = [Carrier(c, c, c % n_b, CARRIER_BW_HZ, _slot_freq(c)) for c in range(n_c)]
    rates = np.round(rng.uniform(50, 400, size=(n_c, n_u)) * MBPS, 0)
    rates[rng.random((n_c, n_u)) < 0.25] = 0.0
    demands = np.round(rng.uniform(5, 300, size=n_u) * MBPS, 0)
    demands[rng.random(n_u) < 0.1] = 0.0
    premium = rng.random(n_u) < 0.5
    users = []
    for u in range(n_u):
        b = int(rng.integers(0, n_b))
        users.append(
            User(
                id=u,
                beam_id=b,
                position=tuple(0.0 if k == b else BEAM_SPACING_DEG for k in range(n_b)),
                demand_bps=float(demands[u]),
                sla=PREMIUM if premium[u] else STANDARD,
                max_carriers=DELTA_MAX if premium[u] else 1,
            )
        )
    if with_prev is None:
        with_prev = bool(rng.random() < 0.5)
    prev = None
    q = None
    if with_prev:
        # a plausible earlier association: eligible pairs only, within each user's cap
        prev = np.zeros((n_c, n_u))
        for u, user in enumerate(users):
            elig = np.flatnonzero(rates[:, u] > 0)
            k = min(int(rng.integers(0, user.max_carriers + 1)), elig.size)
            if k:
                prev[rng.choice(elig, size=k, replace=False), u] = 1.0
        q = int(rng.integers(0, 5))
    return Scenario(
        beams=beams,
        carriers=carriers,
        users=users,
        link=LinkParams(downlink_freq_hz=DOWNLINK_HZ),
        solver=SolverParams(swap_budget_q=q, mip_gap=1e-9, time_limit_s=30.0),
        delta_max=DELTA_MAX,
        prev_association=prev,
        rate_matrix_override=rates,
    )


def generate(preset: str, seed: int) -> Scenario:
    if preset == "paper8":
        return paper8(seed)
    if preset == "evolve2":
        return evolve2(seed)
    if preset == "tiny":
        return tiny(seed)
    raise ValueError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
