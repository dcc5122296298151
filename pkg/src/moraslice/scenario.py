"""Simulation worlds: hexagonal layout, user placement, mobility and session churn."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from moraslice.config import ScenarioConfig
from moraslice.events import EventStream, Join, Leave, Move

BORESIGHTS_DEG = (30.0, 150.0, 270.0)

# RNG stream tags; every stream is keyed by (seed, tag, ...)
_ARRIVALS = 41
_MOBILITY = 42
_HOTSPOTS = 43


@dataclass(frozen=True, eq=False)
class Layout:
    site_xy: np.ndarray
    isd_m: float

    @property
    def n_sites(self) -> int:
        return self.site_xy.shape[0]

    @property
    def n_sectors(self) -> int:
        return 3 * self.n_sites

    @property
    def sector_xy(self) -> np.ndarray:
        return np.repeat(self.site_xy, 3, axis=0)

    @property
    def boresight_deg(self) -> np.ndarray:
        return np.tile(np.array(BORESIGHTS_DEG), self.n_sites)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax): the sites' bounding box grown by half an ISD."""
        lo = self.site_xy.min(axis=0) - self.isd_m / 2
        hi = self.site_xy.max(axis=0) + self.isd_m / 2
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])


def build_layout(rings: int, isd_m: float = 200.0) -> Layout:
    """Hexagonal arrangement of ``1 + 3 rings (rings + 1)`` three-sector sites."""
    if rings < 0:
        raise ValueError("rings must be >= 0")
    cells = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            ring = max(abs(q), abs(r), abs(q + r))
            if ring <= rings:
                cells.append((ring, q, r))
    cells.sort()
    xy = np.array([[isd_m * (q + r / 2), isd_m * math.sqrt(3) / 2 * r]
                   for _, q, r in cells])
    return Layout(xy, float(isd_m))


def uniform_positions(n: int, bounds, rng: np.random.Generator) -> np.ndarray:
    xmin, xmax, ymin, ymax = bounds
    return np.column_stack([rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n)])


def hotspot_centers(count: int, bounds, rng: np.random.Generator) -> np.ndarray:
    return uniform_positions(count, bounds, rng)


def hotspot_positions(n: int, centers, concentration: float, radius_m: float,
                      bounds, rng: np.random.Generator) -> np.ndarray:
    """Mixture placement: each draw is near a hotspot with probability ``concentration``.

    Hotspot draws are isotropic Gaussians around a uniformly chosen centre,
    truncated at three radii and to the simulation area; other draws are uniform.
    """
    if not 0 <= concentration <= 1:
        raise ValueError("concentration must be in [0, 1]")
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    xmin, xmax, ymin, ymax = bounds
    out = np.empty((n, 2))
    for i in range(n):
        if centers.shape[0] and rng.random() < concentration:
            c = centers[rng.integers(centers.shape[0])]
            while True:
                p = c + rng.normal(0.0, radius_m, 2)
                if (np.hypot(*(p - c)) <= 3 * radius_m
                        and xmin <= p[0] <= xmax and ymin <= p[1] <= ymax):
                    break
            out[i] = p
        else:
            out[i] = uniform_positions(1, bounds, rng)[0]
    return out


@dataclass
class RWPState:
    position: np.ndarray
    waypoint: np.ndarray
    speed: float
    pause_left: float = 0.0


def _waypoint(bounds, rng, sampler):
    if sampler is None:
        return uniform_positions(1, bounds, rng)[0]
    return sampler(rng)


def rwp_start(position, bounds, speed_range, rng, sampler=None) -> RWPState:
    lo, hi = speed_range
    return RWPState(np.array(position, dtype=float), _waypoint(bounds, rng, sampler),
                    float(rng.uniform(lo, hi)))


def rwp_step(state: RWPState, dt: float, bounds, speed_range, pause_s: float,
             rng: np.random.Generator, sampler=None) -> RWPState:
    """Advance a random-waypoint walker by ``dt`` seconds (mutates and returns it)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    left = dt
    while left > 0:
        if state.pause_left > 0:
            used = min(left, state.pause_left)
            state.pause_left -= used
            left -= used
            continue
        if state.speed <= 0:
            break
        gap = state.waypoint - state.position
        dist = float(np.hypot(*gap))
        reach = state.speed * left
        if reach < dist:
            state.position = state.position + gap * (reach / dist)
            break
        left -= dist / state.speed
        state.position = state.waypoint.copy()
        state.pause_left = pause_s
        state.waypoint = _waypoint(bounds, rng, sampler)
        state.speed = float(rng.uniform(*speed_range))
    return state


@dataclass(frozen=True)
class UserPlan:
    """Lifetime of one user: join/leave times and operator."""

    user: int
    operator: int
    join: float
    leave: float


def session_plans(config: ScenarioConfig, seed: int) -> list[UserPlan]:
    """Initial populations plus Poisson arrivals with exponential sessions.

    Each operator starts with its nominal population; arrivals come at rate
    ``N_o / mean_duration`` so the expected population stays ``N_o``.
    Residual lifetimes of the initial users are exponential too (memoryless).
    User ids follow join time, then operator, then draw order.
    """
    raw = []
    horizon = config.duration_s
    mean = config.session_mean_s
    for o, n_o in enumerate(config.users_per_operator()):
        rng = np.random.default_rng([seed, _ARRIVALS, o])
        joins = [0.0] * n_o
        if mean > 0:
            t = 0.0
            rate = n_o / mean
            while True:
                t += rng.exponential(1.0 / rate)
                if t > horizon:
                    break
                joins.append(t)
        for k, t in enumerate(joins):
            life = rng.exponential(mean) if mean > 0 else math.inf
            raw.append((t, o, k, t + life))
    raw.sort()
    return [UserPlan(uid, o, t, leave) for uid, (t, o, _, leave) in enumerate(raw)]


def snapshot_times(config: ScenarioConfig) -> np.ndarray:
    n = int(math.floor(config.duration_s / config.snapshot_s + 1e-9))
    return np.arange(n + 1) * config.snapshot_s


class Mobility:
    """Per-user position generator for the configured mobility model."""

    def __init__(self, config: ScenarioConfig, layout: Layout, seed: int):
        self.config = config
        self.bounds = layout.bounds
        self.seed = seed
        self.speed_range = (config.speed_min, config.speed_max)
        n_patterns = 1 if config.hotspot_shared else config.num_operators
        self.centers = [
            hotspot_centers(config.hotspot_count, self.bounds,
                            np.random.default_rng([seed, _HOTSPOTS, p]))
            for p in range(n_patterns)]

    def _sampler(self, operator: int, rng: np.random.Generator):
        """Waypoint sampler; hotspot users keep one home hotspot for life."""
        cfg = self.config
        if cfg.mobility_model != "hotspot":
            return None
        centers = self.centers[0 if cfg.hotspot_shared else operator]
        if centers.shape[0] == 0 or not rng.random() < cfg.hotspot_concentration:
            return None
        home = centers[rng.integers(centers.shape[0])][None, :]

        def draw(r):
            return hotspot_positions(1, home, 1.0, cfg.hotspot_radius_m, self.bounds, r)[0]
        return draw

    def track(self, plan: UserPlan, times) -> tuple[np.ndarray, np.ndarray]:
        """Positions at join time and at each of ``times`` (all after the join)."""
        rng = np.random.default_rng([self.seed, _MOBILITY, plan.user])
        sampler = self._sampler(plan.operator, rng)
        start = _waypoint(self.bounds, rng, sampler)
        out = np.empty((len(times), 2))
        if self.config.mobility_model == "static":
            out[:] = start
            return start, out
        walker = rwp_start(start, self.bounds, self.speed_range, rng, sampler)
        t = plan.join
        for i, tk in enumerate(times):
            if tk > t:
                rwp_step(walker, tk - t, self.bounds, self.speed_range,
                         self.config.pause_s, rng, sampler)
                t = tk
            out[i] = walker.position
        return start, out


def generate_events(config: ScenarioConfig, seed: int | None = None,
                    layout: Layout | None = None) -> EventStream:
    """Join/Leave events from the session process and Move events on the snapshot grid."""
    seed = config.seed if seed is None else seed
    layout = layout or build_layout(config.rings, config.isd_m)
    mob = Mobility(config, layout, seed)
    grid = snapshot_times(config)[1:]
    keyed = []
    for plan in session_plans(config, seed):
        times = grid[(grid > plan.join) & (grid < plan.leave)]
        start, path = mob.track(plan, times)
        keyed.append(((plan.join, 1, plan.user),
                      Join(plan.join, plan.user, plan.operator, tuple(start))))
        for tk, p in zip(times, path):
            keyed.append(((float(tk), 2, plan.user), Move(float(tk), plan.user, tuple(p))))
        if plan.leave <= config.duration_s:
            keyed.append(((plan.leave, 0, plan.user), Leave(plan.leave, plan.user)))
    keyed.sort(key=lambda kv: kv[0])
    return EventStream(ev for _, ev in keyed)
