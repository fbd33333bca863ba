"""Domain types for a carrier-aggregation enabled multibeam satellite system.

Everything here is immutable once constructed. Matrices are dense numpy
arrays flagged read-only; scenarios serialize to a versioned JSON document.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1

PREMIUM = "premium"
STANDARD = "standard"
SLA_CLASSES = (PREMIUM, STANDARD)

GEO_SLANT_RANGE_M = 35_786e3


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Beam:
    id: int
    boresight_deg: tuple[float, float]
    peak_gain_dbi: float
    hpbw_deg: float
    tx_power_w: float


@dataclass(frozen=True)
class Carrier:
    id: int
    transponder_id: int
    beam_id: int
    bandwidth_hz: float
    center_freq_hz: float


@dataclass(frozen=True)
class User:
    id: int
    beam_id: int
    # off-axis angle from every beam boresight, indexed by beam position
    position: tuple[float, ...]
    demand_bps: float
    sla: str = STANDARD
    max_carriers: int = 1


@dataclass(frozen=True)
class LinkParams:
    downlink_freq_hz: float = 19.5e9
    slant_range_m: float = GEO_SLANT_RANGE_M
    terminal_g_over_t_db_k: float = 20.0
    rolloff: float = 0.2
    eligibility_gain_window_db: float = 15.0
    interference_model: str = "cochannel"


@dataclass(frozen=True)
class SolverParams:
    """Knobs for the MILP solve.

    ``swap_budget_q`` is ``None`` when the association may change freely.
    ``node_limit`` truncates branch-and-bound deterministically, unlike
    ``time_limit_s`` which depends on the machine.
    """

    swap_budget_q: Optional[int] = None
    mip_gap: float = 1e-6
    time_limit_s: float = 60.0
    no_oversupply: bool = True
    lexicographic_phase2: bool = True
    node_limit: Optional[int] = None


@dataclass(frozen=True, eq=False)
class Scenario:
    beams: tuple[Beam, ...]
    carriers: tuple[Carrier, ...]
    users: tuple[User, ...]
    link: LinkParams = field(default_factory=LinkParams)
    solver: SolverParams = field(default_factory=SolverParams)
    delta_max: int = 2
    prev_association: Optional[np.ndarray] = None
    rate_matrix_override: Optional[np.ndarray] = None
    demand_profiles: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        object.__setattr__(self, "carriers", tuple(self.carriers))
        object.__setattr__(self, "users", tuple(self.users))
        for name in ("prev_association", "rate_matrix_override", "demand_profiles"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(value))

    @property
    def n_carriers(self) -> int:
        return len(self.carriers)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.carriers), len(self.users))

    @property
    def demands(self) -> np.ndarray:
        return np.array([u.demand_bps for u in self.users], dtype=float)

    @property
    def max_carriers(self) -> np.ndarray:
        return np.array([u.max_carriers for u in self.users], dtype=int)

    def with_demands(self, demands: Sequence[float]) -> "Scenario":
        if len(demands) != self.n_users:
            raise ValueError("demand vector length does not match the user set")
        users = tuple(replace(u, demand_bps=float(d)) for u, d in zip(self.users, demands))
        return replace(self, users=users)

    def with_solver(self, **overrides) -> "Scenario":
        return replace(self, solver=replace(self.solver, **overrides))

    def to_dict(self) -> dict:
        return scenario_to_dict(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return scenario_to_dict(self) == scenario_to_dict(other)

    __hash__ = None


# ---------------------------------------------------------------- validation


def _is_binary(m: np.ndarray) -> bool:
    return bool(np.all((m == 0) | (m == 1)))


def validate_scenario(s: Scenario) -> list[str]:
    """Return human-readable invariant violations; empty when ``s`` is valid."""
    out: list[str] = []
    n_b, n_c, n_u = len(s.beams), s.n_carriers, s.n_users

    def dupes(items, what):
        seen = set()
        for it in items:
            if it.id in seen:
                out.append(f"{what} {it.id}: duplicate id")
            seen.add(it.id)

    dupes(s.beams, "beam")
    dupes(s.carriers, "carrier")
    dupes(s.users, "user")

    for b in s.beams:
        if not b.hpbw_deg > 0:
            out.append(f"beam {b.id}: half-power beamwidth must be > 0")
        if not b.tx_power_w > 0:
            out.append(f"beam {b.id}: transmit power must be > 0")
    for c in s.carriers:
        if not c.bandwidth_hz > 0:
            out.append(f"carrier {c.id}: bandwidth_hz must be > 0")
        if not c.center_freq_hz > 0:
            out.append(f"carrier {c.id}: center_freq_hz must be > 0")
        if not 0 <= c.beam_id < n_b:
            out.append(f"carrier {c.id}: beam_id {c.beam_id} does not exist")
        if c.transponder_id < 0:
            out.append(f"carrier {c.id}: transponder_id must be >= 0")
    if s.delta_max < 1:
        out.append(f"scenario: delta_max must be >= 1, got {s.delta_max}")
    for u in s.users:
        if not u.demand_bps >= 0 or not math.isfinite(u.demand_bps):
            out.append(f"user {u.id}: demand_bps must be finite and >= 0")
        if u.sla not in SLA_CLASSES:
            out.append(f"user {u.id}: unknown sla {u.sla!r}")
        if u.max_carriers < 1:
            out.append(f"user {u.id}: max_carriers must be >= 1")
        if u.sla == STANDARD and u.max_carriers != 1:
            out.append(f"user {u.id}: standard SLA must have max_carriers=1")
        if u.sla == PREMIUM and u.max_carriers > s.delta_max:
            out.append(f"user {u.id}: premium max_carriers exceeds delta_max={s.delta_max}")
        if not 0 <= u.beam_id < n_b:
            out.append(f"user {u.id}: beam_id {u.beam_id} does not exist")
        if len(u.position) != n_b:
            out.append(f"user {u.id}: position needs one off-axis angle per beam ({n_b})")
        elif any(a < 0 or not math.isfinite(a) for a in u.position):
            out.append(f"user {u.id}: off-axis angles must be finite and >= 0")

    lk = s.link
    if not lk.slant_range_m > 0:
        out.append("link: slant_range_m must be > 0")
    if not 0 <= lk.rolloff < 1:
        out.append("link: rolloff must lie in [0, 1)")
    if not lk.downlink_freq_hz > 0:
        out.append("link: downlink_freq_hz must be > 0")
    if lk.eligibility_gain_window_db < 0:
        out.append("link: eligibility_gain_window_db must be >= 0")
    if lk.interference_model not in ("none", "cochannel"):
        out.append(f"link: unknown interference_model {lk.interference_model!r}")

    sp = s.solver
    if not sp.mip_gap >= 0:
        out.append("solver: mip_gap must be >= 0")
    if not sp.time_limit_s > 0:
        out.append("solver: time_limit_s must be > 0")
    if sp.swap_budget_q is not None and sp.swap_budget_q < 0:
        out.append("solver: swap_budget_q must be >= 0")
    if sp.node_limit is not None and sp.node_limit < 1:
        out.append("solver: node_limit must be >= 1")

    if s.prev_association is not None:
        pa = s.prev_association
        if pa.shape != (n_c, n_u):
            out.append(f"prev_association: shape {pa.shape} != {(n_c, n_u)}")
        elif not _is_binary(pa):
            out.append("prev_association: association must be binary")
    if s.rate_matrix_override is not None:
        r = s.rate_matrix_override
        if r.shape != (n_c, n_u):
            out.append(f"rate_matrix_override: shape {r.shape} != {(n_c, n_u)}")
        elif not np.all(np.isfinite(r)) or np.any(r < 0):
            out.append("rate_matrix_override: entries must be finite and >= 0")
    if s.demand_profiles is not None:
        dp = s.demand_profiles
        if dp.ndim != 2 or dp.shape[1] != n_u:
            out.append(f"demand_profiles: expected rows of length {n_u}")
        elif not np.all(np.isfinite(dp)) or np.any(dp < 0):
            out.append("demand_profiles: entries must be finite and >= 0")
    return out


def swap_distance(a_prev, a_next) -> int:
    """Number of association entries that differ between two epochs."""
    a_prev = np.asarray(a_prev)
    a_next = np.asarray(a_next)
    if a_prev.shape != a_next.shape:
        raise ValueError(f"shape mismatch: {a_prev.shape} vs {a_next.shape}")
    return int(np.abs(np.rint(a_next).astype(np.int64) - np.rint(a_prev).astype(np.int64)).sum())


# ------------------------------------------------------------- serialization


def _matrix_out(m):
    if m is None:
        return None
    return [[_num(x) for x in row] for row in np.asarray(m).tolist()]


def _num(x):
    # integral floats are written as ints so association matrices stay readable
    if isinstance(x, float) and x.is_integer() and abs(x) < 2**53:
        return int(x)
    return x


def scenario_to_dict(s: Scenario) -> dict:
    solver = {f.name: getattr(s.solver, f.name) for f in fields(SolverParams)}
    if solver["swap_budget_q"] is None:
        solver["swap_budget_q"] = "unconstrained"
    return {
        "schema": SCHEMA_VERSION,
        "delta_max": s.delta_max,
        "beams": [
            {
                "id": b.id,
                "boresight_deg": list(b.boresight_deg),
                "peak_gain_dbi": b.peak_gain_dbi,
                "hpbw_deg": b.hpbw_deg,
                "tx_power_w": b.tx_power_w,
            }
            for b in s.beams
        ],
        "carriers": [
            {f.name: getattr(c, f.name) for f in fields(Carrier)} for c in s.carriers
        ],
        "users": [
            {
                "id": u.id,
                "beam_id": u.beam_id,
                "position": list(u.position),
                "demand_bps": u.demand_bps,
                "sla": u.sla,
                "max_carriers": u.max_carriers,
            }
            for u in s.users
        ],
        "link": {f.name: getattr(s.link, f.name) for f in fields(LinkParams)},
        "solver": solver,
        "prev_association": _matrix_out(s.prev_association),
        "rate_matrix_override": _matrix_out(s.rate_matrix_override),
        "demand_profiles": _matrix_out(s.demand_profiles),
    }


class SchemaError(ValueError):
    pass


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    if d.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported or missing schema version: {d.get('schema')!r}")
    try:
        beams = [
            Beam(
                id=int(b["id"]),
                boresight_deg=tuple(float(x) for x in b["boresight_deg"]),
                peak_gain_dbi=float(b["peak_gain_dbi"]),
                hpbw_deg=float(b["hpbw_deg"]),
                tx_power_w=float(b["tx_power_w"]),
            )
            for b in d["beams"]
        ]
        carriers = [
            Carrier(
                id=int(c["id"]),
                transponder_id=int(c["transponder_id"]),
                beam_id=int(c["beam_id"]),
                bandwidth_hz=float(c["bandwidth_hz"]),
                center_freq_hz=float(c["center_freq_hz"]),
            )
            for c in d["carriers"]
        ]
        users = [
            User(
                id=int(u["id"]),
                beam_id=int(u["beam_id"]),
                position=tuple(float(x) for x in u["position"]),
                demand_bps=float(u["demand_bps"]),
                sla=str(u.get("sla", STANDARD)),
                max_carriers=int(u.get("max_carriers", 1)),
            )
            for u in d["users"]
        ]
        link = LinkParams(**{k: v for k, v in d.get("link", {}).items()})
        sp = dict(d.get("solver", {}))
        if sp.get("swap_budget_q") == "unconstrained":
            sp["swap_budget_q"] = None
        solver = SolverParams(**sp)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed scenario document: {exc}") from exc

    def mat(key):
        v = d.get(key)
        return None if v is None else np.array(v, dtype=float)

    return Scenario(
        beams=beams,
        carriers=carriers,
        users=users,
        link=link,
        solver=solver,
        delta_max=int(d.get("delta_max", 2)),
        prev_association=mat("prev_association"),
        rate_matrix_override=mat("rate_matrix_override"),
        demand_profiles=mat("demand_profiles"),
    )


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def serialize_scenario(s: Scenario) -> str:
    return dumps(scenario_to_dict(s))


def parse_scenario(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_scenario(s))
