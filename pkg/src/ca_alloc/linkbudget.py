"""Synthetic downlink budget producing the achievable-rate matrix.

Beam patterns are Gaussian in dB with a sidelobe floor; capacity is the
Shannon bound over the roll-off adjusted symbol rate.
"""
from __future__ import annotations

import numpy as np

from .model import LinkParams, Scenario  # noqa: F401  (LinkParams re-exported)

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN_DBW = -228.5991631  # 10*log10(1.380649e-23)
SIDELOBE_FLOOR_DB = 30.0


def beam_gain(beam, user_offaxis_deg):
    """Gain in dBi toward a point ``user_offaxis_deg`` away from boresight.

    ``hpbw_deg`` is the full half-power width, so the -3 dB contour sits at
    half of it. Works elementwise on arrays.
    """
    if not beam.hpbw_deg > 0:
        raise ValueError("half-power beamwidth must be > 0")
    theta = np.asarray(user_offaxis_deg, dtype=float)
    g = beam.peak_gain_dbi - 12.0 * (theta / beam.hpbw_deg) ** 2
    g = np.maximum(g, beam.peak_gain_dbi - SIDELOBE_FLOOR_DB)
    return float(g) if g.ndim == 0 else g


def free_space_path_loss_db(distance_m, freq_hz):
    wavelength = SPEED_OF_LIGHT / np.asarray(freq_hz, dtype=float)
    return 20.0 * np.log10(4.0 * np.pi * np.asarray(distance_m, dtype=float) / wavelength)


def shannon_rate(bandwidth_hz, rolloff, sinr_linear):
    return bandwidth_hz / (1.0 + rolloff) * np.log2(1.0 + sinr_linear)


def gain_matrix(s: Scenario) -> np.ndarray:
    """Beam gain (dBi) of each carrier's beam toward each user, N_C x N_U."""
    pos = np.array([u.position for u in s.users], dtype=float).reshape(s.n_users, len(s.beams))
    out = np.empty(s.shape)
    for c, car in enumerate(s.carriers):
        out[c] = beam_gain(s.beams[car.beam_id], pos[:, car.beam_id])
    return out


def received_power_dbw(s: Scenario, gains_db: np.ndarray) -> np.ndarray:
    """Power from each carrier at each user terminal, before the receive G/T.

    A beam's transmit power is split evenly across the carriers it hosts.
    """
    per_beam = np.bincount([c.beam_id for c in s.carriers], minlength=len(s.beams))
    p_tx = np.array(
        [10 * np.log10(s.beams[c.beam_id].tx_power_w / per_beam[c.beam_id]) for c in s.carriers]
    )
    fspl = free_space_path_loss_db(s.link.slant_range_m, [c.center_freq_hz for c in s.carriers])
    return (p_tx - fspl)[:, None] + gains_db


def sinr_matrix(s: Scenario, interference_model: str | None = None) -> np.ndarray:
    """Linear SINR per (carrier, user)."""
    model = interference_model or s.link.interference_model
    gains = gain_matrix(s)
    rx = received_power_dbw(s, gains)
    # signal-to-noise-density with the terminal noise folded into G/T
    c_n0 = rx + s.link.terminal_g_over_t_db_k - BOLTZMANN_DBW
    bw = np.array([c.bandwidth_hz for c in s.carriers])
    snr = 10.0 ** ((c_n0 - 10 * np.log10(bw)[:, None]) / 10.0)
    if model == "none":
        return snr
    if model != "cochannel":
        raise ValueError(f"unknown interference model {model!r}")
    # interference-to-noise ratio: same-frequency carriers radiated by other beams
    rx_lin = 10.0 ** (c_n0 / 10.0) / bw[:, None]
    freqs = np.array([c.center_freq_hz for c in s.carriers])
    beams = np.array([c.beam_id for c in s.carriers])
    sinr = np.empty_like(snr)
    for c in range(s.n_carriers):
        co = (freqs == freqs[c]) & (beams != beams[c])
        inr = rx_lin[co].sum(axis=0)
        sinr[c] = snr[c] / (1.0 + inr)
    return sinr


def eligibility_mask(s: Scenario, gains_db: np.ndarray | None = None) -> np.ndarray:
    """True where a carrier's beam gain is within the window of the user's best carrier."""
    g = gain_matrix(s) if gains_db is None else gains_db
    if g.size == 0:
        return np.zeros(g.shape, dtype=bool)
    best = g.max(axis=0, keepdims=True)
    return g >= best - s.link.eligibility_gain_window_db


def compute_rate_matrix(s: Scenario, interference_model: str | None = None) -> np.ndarray:
    """Achievable rate (bit/s) at full fill rate; 0 marks an ineligible pair."""
    if s.rate_matrix_override is not None:
        raise ValueError("scenario carries rate_matrix_override; use rate_matrix() instead")
    bw = np.array([c.bandwidth_hz for c in s.carriers])
    sinr = sinr_matrix(s, interference_model)
    r = shannon_rate(bw[:, None], s.link.rolloff, sinr)
    r[~eligibility_mask(s)] = 0.0
    return r


def rate_matrix(s: Scenario) -> np.ndarray:
    """The scenario's override if present, otherwise the link-budget rates."""
    if s.rate_matrix_override is not None:
        return np.array(s.rate_matrix_override, dtype=float)
    return compute_rate_matrix(s)
