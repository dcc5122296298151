"""Downlink rate model: path loss, sector antennas, shadowing, SINR, rate mapping."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

D_MIN_M = 3.0
SHANNON = "shannon"
MCS = "mcs"

# stream tag for shadowing draws; see Shadowing.sample
_SHADOW_STREAM = 11
_FADING_STREAM = 12


@dataclass(frozen=True)
class RadioParams:
    tx_power_dbm: float = 41.0
    noise_dbm: float = -104.0
    carrier_ghz: float = 2.5
    bandwidth_hz: float = 1e7
    antenna_gain_dbi: float = 17.0
    front_to_back_db: float = 25.0
    beamwidth_deg: float = 120.0
    shadowing_sigma_db: float = 8.0
    shadowing_update_s: float = 1.0
    fading: bool = False

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth must be positive")
        if self.shadowing_sigma_db < 0 or not self.shadowing_update_s > 0:
            raise ValueError("invalid shadowing parameters")


@dataclass(frozen=True, eq=False)
class MCSTable:
    sinr_db: np.ndarray
    efficiency: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.sinr_db, dtype=float)
        e = np.asarray(self.efficiency, dtype=float)
        if t.ndim != 1 or t.shape != e.shape or t.size == 0:
            raise ValueError("MCS table needs matching non-empty columns")
        if np.any(np.diff(t) <= 0):
            raise ValueError("MCS thresholds must be strictly increasing")
        if np.any(np.diff(e) < 0):
            raise ValueError("MCS efficiencies must be non-decreasing")
        if np.any(e > np.log2(1 + 10 ** (t / 10))):
            raise ValueError("MCS efficiency exceeds the Shannon bound at its threshold")
        object.__setattr__(self, "sinr_db", t)
        object.__setattr__(self, "efficiency", e)

    def efficiency_at(self, sinr_db) -> np.ndarray:
        idx = np.searchsorted(self.sinr_db, np.asarray(sinr_db, dtype=float), side="right") - 1
        return np.where(idx >= 0, self.efficiency[np.clip(idx, 0, None)], 0.0)


def load_mcs_table(path: str | Path | None = None) -> MCSTable:
    if path is None:
        text = resources.files("moraslice.data").joinpath("mcs_table.txt").read_text()
    else:
        text = Path(path).read_text()
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad MCS table line: {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    t, e = zip(*rows)
    return MCSTable(np.array(t), np.array(e))


def path_loss_db(distance_m, carrier_ghz: float = 2.5):
    """``36.7 log10(d) + 22.7 + 26 log10(f_c)`` with ``d`` floored at 3 m."""
    d = np.maximum(np.asarray(distance_m, dtype=float), D_MIN_M)
    return 36.7 * np.log10(d) + 22.7 + 26.0 * np.log10(carrier_ghz)


def antenna_gain_db(offset_deg, params: RadioParams = RadioParams()):
    """Flat peak gain inside the sector beam, front-to-back attenuation outside."""
    off = np.abs((np.asarray(offset_deg, dtype=float) + 180.0) % 360.0 - 180.0)
    inside = off <= params.beamwidth_deg / 2
    return np.where(inside, params.antenna_gain_dbi,
                    params.antenna_gain_dbi - params.front_to_back_db)


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def sinr(gains, b: int, tx_power_mw, noise_mw: float) -> float:
    """SINR of one user towards station ``b`` given linear gains to every station."""
    g = np.asarray(gains, dtype=float)
    p = np.broadcast_to(np.asarray(tx_power_mw, dtype=float), g.shape)
    rx = p * g
    return float(rx[b] / (rx.sum() - rx[b] + noise_mw))


def sinr_matrix(rx_mw, noise_mw: float) -> np.ndarray:
    """Row-wise SINR with every other column as interference."""
    rx = np.asarray(rx_mw, dtype=float)
    total = rx.sum(axis=1, keepdims=True)
    return rx / (total - rx + noise_mw)


def achievable_rate(sinr_linear, params: RadioParams = RadioParams(), mode: str = SHANNON,
                    table: MCSTable | None = None):
    s = np.asarray(sinr_linear, dtype=float)
    if mode == SHANNON:
        return params.bandwidth_hz * np.log2(1.0 + s)
    if mode == MCS:
        table = table or default_mcs_table()
        with np.errstate(divide="ignore"):
            s_db = 10.0 * np.log10(s)
        return params.bandwidth_hz * table.efficiency_at(s_db)
    raise ValueError(f"unknown rate mode {mode!r}")


_DEFAULT_TABLE = None


def default_mcs_table() -> MCSTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_mcs_table()
    return _DEFAULT_TABLE


@dataclass(frozen=True)
class Shadowing:
    """I.i.d. log-normal shadowing per (user, station), redrawn on a time grid.

    Each user row at each grid index has its own RNG stream derived from the
    master seed, so rows can be produced in any order.
    """

    seed: int
    sigma_db: float = 8.0
    update_s: float = 1.0
    enabled: bool = True

    def index(self, t: float) -> int:
        return int(np.floor(t / self.update_s + 1e-9))

    def sample(self, user_ids, t: float, n_stations: int) -> np.ndarray:
        out = np.zeros((len(user_ids), n_stations))
        if not self.enabled or self.sigma_db == 0:
            return out
        k = self.index(t)
        for i, uid in enumerate(user_ids):
            rng = np.random.default_rng([self.seed, _SHADOW_STREAM, int(uid), k])
            out[i] = rng.normal(0.0, self.sigma_db, n_stations)
        return out


def rayleigh_gains(seed: int, user_ids, index: int, n_stations: int) -> np.ndarray:
    """Exponential power gains, one independent stream per (user, time index)."""
    out = np.empty((len(user_ids), n_stations))
    for i, uid in enumerate(user_ids):
        rng = np.random.default_rng([seed, _FADING_STREAM, int(uid), int(index)])
        out[i] = rng.exponential(1.0, n_stations)
    return out


def geometry(layout, positions):
    """Distances (m) and boresight offsets (deg) from every user to every sector."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    d = pos[:, None, :] - layout.sector_xy[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    bearing = np.degrees(np.arctan2(d[..., 1], d[..., 0]))
    return dist, bearing - layout.boresight_deg[None, :]


@dataclass(frozen=True, eq=False)
class RateRows:
    rates: np.ndarray
    sinr: np.ndarray
    uncovered: np.ndarray


def build_rate_matrix(layout, positions, params: RadioParams = RadioParams(),
                      shadow_db=None, mode: str = SHANNON, table: MCSTable | None = None,
                      fading=None) -> RateRows:
    """Rates (bits/s) and average SINR for every user position and sector.

    ``shadow_db`` is an optional ``(U, B)`` array of shadowing offsets.
    ``fading`` is an optional ``(U, B)`` array of Rayleigh power gains; in mcs
    mode it multiplies the SINR used for MCS selection only.
    """
    dist, offset = geometry(layout, positions)
    rx_dbm = (params.tx_power_dbm - path_loss_db(dist, params.carrier_ghz)
              + antenna_gain_db(offset, params))
    if shadow_db is not None:
        rx_dbm = rx_dbm + shadow_db
    s = sinr_matrix(dbm_to_mw(rx_dbm), float(dbm_to_mw(params.noise_dbm)))
    s_rate = s
    if mode == MCS and fading is not None:
        s_rate = s * fading
    rates = achievable_rate(s_rate, params, mode, table)
    return RateRows(rates, s, ~np.any(rates > 0, axis=1))
