"""Scenario configuration and the flat ``key=value`` file format.

Lines are ``key = value``; ``#`` starts a comment; nested settings use dotted
keys (``mobility.speed_min``). Unknown keys are rejected.

Keys
----
seed                       master seed (int)
rings                      hexagonal rings around the centre site (0 -> 1 site)
isd_m                      inter-site distance, metres
num_operators              number of tenants
shares                     comma-separated shares (default: equal); must sum to 1
density                    mean users per sector
duration_s                 simulated time
snapshot_s                 metrics / mobility grid
warmup_fraction            leading fraction of snapshots excluded from averages
policy                     gllg | dg | glg | dg_ss | sinr_ss | brute | online
m                          reassociation budget for gllg
hysteresis                 relative gain threshold for any reassociation
capacity                   multiplier on every rate
mobility.model             rwp | hotspot | static
mobility.speed_min         RWP speed range, m/s
mobility.speed_max
mobility.pause_s           RWP pause at each waypoint, s
hotspot.count              hotspot centres per pattern
hotspot.radius_m           Gaussian spread around a centre
hotspot.concentration      fraction of users placed at hotspots (0..1)
hotspot.shared             true: one pattern for all operators
sessions.mean_duration_s   mean session length; 0 disables churn
traffic.file_size_bits     download size
radio.tx_power_dbm, radio.noise_dbm, radio.carrier_ghz, radio.bandwidth_hz,
radio.antenna_gain_dbi, radio.front_to_back_db, radio.shadowing_sigma_db,
radio.shadowing_update_s   channel parameters
radio.fading               Rayleigh fading on MCS selection (true/false)
radio.rate_mode            shannon | mcs
radio.mcs_table            path of an alternative MCS table
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from moraslice.channel import RadioParams

POLICIES = ("gllg", "dg", "glg", "dg_ss", "sinr_ss", "brute", "online")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 1
    rings: int = 1
    isd_m: float = 200.0
    num_operators: int = 3
    shares: tuple = ()
    density: float = 10.0
    duration_s: float = 60.0
    snapshot_s: float = 1.0
    warmup_fraction: float = 0.1
    policy: str = "gllg"
    m: int = 3
    hysteresis: float = 0.0
    capacity: float = 1.0
    mobility_model: str = "rwp"
    speed_min: float = 0.5
    speed_max: float = 1.5
    pause_s: float = 0.0
    hotspot_count: int = 3
    hotspot_radius_m: float = 30.0
    hotspot_concentration: float = 0.0
    hotspot_shared: bool = True
    session_mean_s: float = 60.0
    file_size_bits: float = 16e6
    rate_mode: str = "shannon"
    mcs_table: str = ""
    radio: RadioParams = field(default_factory=RadioParams)

    def __post_init__(self):
        if self.num_operators < 1:
            raise ConfigError("num_operators must be >= 1")
        shares = tuple(float(s) for s in self.shares) or \
            tuple([1.0 / self.num_operators] * self.num_operators)
        if len(shares) != self.num_operators:
            raise ConfigError("number of shares differs from num_operators")
        if any(s <= 0 for s in shares) or abs(sum(shares) - 1.0) > 1e-9:
            raise ConfigError("shares must be positive and sum to 1")
        object.__setattr__(self, "shares", shares)
        if not self.density > 0:
            raise ConfigError("density must be positive")
        if self.rings < 0:
            raise ConfigError("rings must be >= 0")
        if self.duration_s < 0 or not self.snapshot_s > 0:
            raise ConfigError("invalid duration/snapshot")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.mobility_model not in ("rwp", "hotspot", "static"):
            raise ConfigError(f"unknown mobility model {self.mobility_model!r}")
        if not 0 <= self.hotspot_concentration <= 1:
            raise ConfigError("hotspot.concentration must be in [0, 1]")
        if self.rate_mode not in ("shannon", "mcs"):
            raise ConfigError(f"unknown rate mode {self.rate_mode!r}")
        if self.speed_min < 0 or self.speed_max < self.speed_min:
            raise ConfigError("invalid speed range")
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        if not self.capacity > 0:
            raise ConfigError("capacity must be positive")

    @property
    def n_sectors(self) -> int:
        return 3 * (1 + 3 * self.rings * (self.rings + 1))

    def users_per_operator(self) -> list[int]:
        total = self.density * self.n_sectors
        return [max(1, int(round(total * s))) for s in self.shares]

    def replace(self, **kw) -> ScenarioConfig:
        if "num_operators" in kw and "shares" not in kw:
            kw["shares"] = ()
        return dataclasses.replace(self, **kw)


def _bool(v: str) -> bool:
    t = v.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _shares(v: str) -> tuple:
    return tuple(float(s) for s in v.split(",") if s.strip())


# key -> (field, parser); radio.* keys go to RadioParams
_KEYS = {
    "seed": ("seed", int),
    "rings": ("rings", int),
    "isd_m": ("isd_m", float),
    "num_operators": ("num_operators", int),
    "shares": ("shares", _shares),
    "density": ("density", float),
    "duration_s": ("duration_s", float),
    "snapshot_s": ("snapshot_s", float),
    "warmup_fraction": ("warmup_fraction", float),
    "policy": ("policy", str),
    "m": ("m", int),
    "hysteresis": ("hysteresis", float),
    "capacity": ("capacity", float),
    "mobility.model": ("mobility_model", str),
    "mobility.speed_min": ("speed_min", float),
    "mobility.speed_max": ("speed_max", float),
    "mobility.pause_s": ("pause_s", float),
    "hotspot.count": ("hotspot_count", int),
    "hotspot.radius_m": ("hotspot_radius_m", float),
    "hotspot.concentration": ("hotspot_concentration", float),
    "hotspot.shared": ("hotspot_shared", _bool),
    "sessions.mean_duration_s": ("session_mean_s", float),
    "traffic.file_size_bits": ("file_size_bits", float),
    "radio.rate_mode": ("rate_mode", str),
    "radio.mcs_table": ("mcs_table", str),
}
_RADIO_KEYS = {
    "radio.tx_power_dbm": ("tx_power_dbm", float),
    "radio.noise_dbm": ("noise_dbm", float),
    "radio.carrier_ghz": ("carrier_ghz", float),
    "radio.bandwidth_hz": ("bandwidth_hz", float),
    "radio.antenna_gain_dbi": ("antenna_gain_dbi", float),
    "radio.front_to_back_db": ("front_to_back_db", float),
    "radio.shadowing_sigma_db": ("shadowing_sigma_db", float),
    "radio.shadowing_update_s": ("shadowing_update_s", float),
    "radio.fading": ("fading", _bool),
}
KNOWN_KEYS = tuple(_KEYS) + tuple(_RADIO_KEYS)


def parse_lines(lines) -> dict:
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS and key not in _RADIO_KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        out[key] = value
    return out


def from_mapping(values: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    base = base or ScenarioConfig()
    top, radio = {}, {}
    for key, value in values.items():
        try:
            if key in _KEYS:
                name, conv = _KEYS[key]
                top[name] = conv(value)
            elif key in _RADIO_KEYS:
                name, conv = _RADIO_KEYS[key]
                radio[name] = conv(value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if "num_operators" in top and "shares" not in top:
        top["shares"] = ()
    try:
        if radio:
            top["radio"] = dataclasses.replace(base.radio, **radio)
        return dataclasses.replace(base, **top)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, overrides=()) -> ScenarioConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_lines(text.splitlines()))
    values.update(parse_lines(overrides))
    return from_mapping(values)
