"""Event-driven replay of a scenario under an association policy.

A trajectory is built once per (config, seed): the event stream plus the
rate and SINR rows every Join/Move event brings. Policies then replay the
same trajectory, which makes comparisons between policies and capacity
multipliers paired by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from moraslice import channel, kernels
from moraslice.config import ScenarioConfig
from moraslice.events import Join, Leave, Move
from moraslice.model import NetworkState
from moraslice.scenario import Layout, build_layout, generate_events, snapshot_times
from moraslice.solvers import gllg
from moraslice.solvers.common import WorkingCopy
from moraslice.solvers.exact import brute_force_mora


@dataclass(frozen=True, eq=False)
class Trajectory:
    config: ScenarioConfig
    seed: int
    layout: Layout
    events: tuple
    rows: np.ndarray        # (E, B) rates; zero rows for Leave events
    sinr: np.ndarray        # (E, B) average SINR
    operator_of: np.ndarray  # (N,) operator index per user id
    snapshots: np.ndarray

    @property
    def n_users(self) -> int:
        return self.operator_of.shape[0]

    @property
    def n_stations(self) -> int:
        return self.rows.shape[1]


def build_trajectory(config: ScenarioConfig, seed: int | None = None) -> Trajectory:
    seed = config.seed if seed is None else seed
    layout = build_layout(config.rings, config.isd_m)
    events = tuple(generate_events(config, seed, layout))
    n_st = layout.n_sectors
    radio = config.radio
    shadow = channel.Shadowing(seed, radio.shadowing_sigma_db, radio.shadowing_update_s)
    table = channel.load_mcs_table(config.mcs_table) if config.mcs_table else None
    rows = np.zeros((len(events), n_st))
    sinr = np.zeros((len(events), n_st))
    idx = [i for i, ev in enumerate(events) if not isinstance(ev, Leave)]
    if idx:
        pos = np.array([events[i].position for i in idx])
        uids = [events[i].user for i in idx]
        shadow_db = np.vstack([shadow.sample([events[i].user], events[i].time, n_st)
                               for i in idx])
        fading = None
        if radio.fading and config.rate_mode == channel.MCS:
            fading = np.vstack([
                channel.rayleigh_gains(seed, [u], shadow.index(events[i].time), n_st)
                for u, i in zip(uids, idx)])
        rr = channel.build_rate_matrix(layout, pos, radio, shadow_db,
                                       config.rate_mode, table, fading)
        rows[idx] = rr.rates
        sinr[idx] = rr.sinr
    ops = {ev.user: ev.operator for ev in events if isinstance(ev, Join)}
    operator_of = np.array([ops[u] for u in range(len(ops))], dtype=np.int64)
    return Trajectory(config, seed, layout, events, rows, sinr, operator_of,
                      snapshot_times(config))


class LiveNetwork(WorkingCopy):
    """Slot-per-user working copy; absent or uncovered users have ``x = -1``.

    Weights follow ``s_o / |present covered users of o|`` and are refreshed
    on every membership change. Moves skip the utility trace.
    """

    def __init__(self, n_users: int, n_stations: int, operator_of, shares,
                 unit_weights: bool = False):
        super().__init__(np.zeros((n_users, n_stations)), np.zeros(n_users),
                         np.full(n_users, -1), n_stations)
        self.operator_of = np.asarray(operator_of)
        self.shares = np.asarray(shares, dtype=float)
        self.unit_weights = unit_weights
        self.member = np.zeros(n_users, dtype=bool)
        self.handoffs = 0

    def start_trace(self):
        pass

    def move(self, u: int, q: int):
        a = int(self.x[u])
        w = self.weights[u]
        self.loads[a] -= w
        self.loads[q] += w
        self.x[u] = q
        self.handoffs += 1

    def covered(self, u: int) -> bool:
        return bool(np.any(self.rates[u] > 0))

    def _reweigh(self, o: int):
        members = np.flatnonzero(self.member & (self.operator_of == o))
        if self.unit_weights:
            self.weights[members] = 1.0
        elif members.size:
            self.weights[members] = self.shares[o] / members.size
        self.refresh_loads()

    def admit(self, u: int):
        """Count ``u`` in its operator's weights, still unassociated."""
        self.member[u] = True
        self.x[u] = -1
        self._reweigh(self.operator_of[u])

    def evict(self, u: int) -> int:
        b = int(self.x[u])
        self.member[u] = False
        self.x[u] = -1
        self.weights[u] = 0.0
        self._reweigh(self.operator_of[u])
        return b

    def user_rates(self) -> np.ndarray:
        r = np.zeros(self.x.shape[0])
        act = np.flatnonzero(self.x >= 0)
        b = self.x[act]
        r[act] = self.weights[act] * self.rates[act, b] / self.loads[b]
        return r


# ---------------------------------------------------------------------------
# policies
# ---------------------------------------------------------------------------

class Policy:
    """Reacts to events on a shared-resource network (weighted PF allocation)."""

    name = "policy"

    def __init__(self, traj: Trajectory, capacity: float):
        cfg = traj.config
        self.eps = cfg.hysteresis
        self.capacity = capacity
        self.net = LiveNetwork(traj.n_users, traj.n_stations, traj.operator_of, cfg.shares)

    def join(self, u, row, sinr_row):
        net = self.net
        net.rates[u] = row * self.capacity
        if net.covered(u):
            net.admit(u)
            self.on_join(u)

    def leave(self, u):
        net = self.net
        if net.member[u]:
            b = net.evict(u)
            self.on_leave(u, b)

    def relocate(self, u, row, sinr_row):
        net = self.net
        net.rates[u] = row * self.capacity
        was, now = bool(net.member[u]), net.covered(u)
        if was and now:
            self.on_move(u)
        elif was:
            b = net.evict(u)
            self.on_leave(u, b)
        elif now:
            net.admit(u)
            self.on_join(u)

    def snapshot(self):
        pass

    # shared-resource defaults: best station on arrival, no rebalancing
    def on_join(self, u):
        self.net.place(u, self.net.join_target(u))

    def on_leave(self, u, b):
        pass

    def on_move(self, u):
        pass

    def user_rates(self) -> np.ndarray:
        return self.net.user_rates()

    def members(self) -> np.ndarray:
        return self.net.member

    @property
    def handoffs(self) -> int:
        return self.net.handoffs


class GLLGPolicy(Policy):
    """Semi-online handling with at most ``m + 1`` extra moves per event.

    ``m = 0`` is the pure online policy: arrivals pick their best station and
    a moving user may hand herself over, but nobody else is touched.
    """

    def __init__(self, traj, capacity, m: int):
        super().__init__(traj, capacity)
        self.m = m
        self.name = f"gllg{m}"

    def on_join(self, u):
        gllg.handle_join(self.net, u, self.m, self.eps)

    def on_leave(self, u, b):
        gllg.handle_leave(self.net, b, self.m, self.eps)

    def on_move(self, u):
        gllg.handle_move(self.net, u, self.m, self.eps)


class ReoptPolicy(Policy):
    """Runs DG or GLG to convergence at every snapshot."""

    def __init__(self, traj, capacity, method: str):
        super().__init__(traj, capacity)
        if method not in ("dg", "glg"):
            raise ValueError(method)
        self.method = method
        self.name = method

    def snapshot(self):
        net = self.net
        cap = max(1, 100 * traj_users(net))
        if self.method == "dg":
            _, n, _ = kernels.distributed_greedy(net.rates, net.weights, net.x,
                                                 net.loads, self.eps, cap)
        else:
            _, _, n, _ = kernels.greedy_largest_gain(net.rates, net.weights, net.x,
                                                     net.loads, self.eps, cap)
        net.handoffs += int(n)


def traj_users(net: LiveNetwork) -> int:
    return int(np.count_nonzero(net.x >= 0))


class BrutePolicy(Policy):
    """Exhaustive MORA optimum at every snapshot (small instances only)."""

    name = "brute"

    def snapshot(self):
        net = self.net
        act = np.flatnonzero(net.x >= 0)
        if act.size == 0:
            return
        state = NetworkState.build(
            list(net.shares), list(net.operator_of[act]), net.rates[act],
            user_ids=[int(u) for u in act])
        # operators without present users keep their share but carry no weight
        x, _, _ = brute_force_mora(state)
        net.handoffs += int(np.count_nonzero(net.x[act] != x.x))
        net.x[act] = x.x
        net.refresh_loads()


class SlicedPolicy(Policy):
    """Static slicing: operator ``o`` owns ``s_o`` of every station.

    Inside a slice users share equally. ``assoc='sinr'`` attaches users to
    their highest-SINR station; ``assoc='dg'`` runs DG per slice.
    """

    def __init__(self, traj, capacity, assoc: str):
        super().__init__(traj, capacity)
        if assoc not in ("sinr", "dg"):
            raise ValueError(assoc)
        self.assoc = assoc
        self.name = f"{assoc}_ss"
        cfg = traj.config
        self.shares = np.asarray(cfg.shares)
        self.sinr_rows = np.zeros((traj.n_users, traj.n_stations))
        self.slices = [LiveNetwork(traj.n_users, traj.n_stations, traj.operator_of,
                                   cfg.shares, unit_weights=True)
                       for _ in cfg.shares]

    def _slice(self, u):
        return self.slices[self.net.operator_of[u]]

    def _target(self, u, sl):
        if self.assoc == "sinr":
            return int(np.argmax(self.sinr_rows[u]))
        return sl.join_target(u)

    def join(self, u, row, sinr_row):
        self.sinr_rows[u] = sinr_row
        sl = self._slice(u)
        sl.rates[u] = row * self.capacity * self.shares[self.net.operator_of[u]]
        self.net.rates[u] = row * self.capacity
        if sl.covered(u):
            self.net.member[u] = True
            sl.admit(u)
            sl.place(u, self._target(u, sl))

    def leave(self, u):
        sl = self._slice(u)
        if sl.member[u]:
            sl.evict(u)
            self.net.member[u] = False

    def relocate(self, u, row, sinr_row):
        sl = self._slice(u)
        self.sinr_rows[u] = sinr_row
        sl.rates[u] = row * self.capacity * self.shares[self.net.operator_of[u]]
        self.net.rates[u] = row * self.capacity
        was, now = bool(sl.member[u]), sl.covered(u)
        if was and not now:
            self.leave(u)
        elif now and not was:
            self.join(u, row, sinr_row)
        elif now and self.assoc == "sinr":
            b = int(np.argmax(sinr_row))
            if b != sl.x[u]:
                sl.move(u, b)

    def snapshot(self):
        if self.assoc != "dg":
            return
        for sl in self.slices:
            cap = max(1, 100 * traj_users(sl))
            _, n, _ = kernels.distributed_greedy(sl.rates, sl.weights, sl.x,
                                                 sl.loads, self.eps, cap)
            sl.handoffs += int(n)

    def user_rates(self) -> np.ndarray:
        r = np.zeros(self.net.x.shape[0])
        for sl in self.slices:
            r += sl.user_rates()
        return r

    def members(self) -> np.ndarray:
        return self.net.member

    @property
    def handoffs(self) -> int:
        return sum(sl.handoffs for sl in self.slices)


def make_policy(name: str, traj: Trajectory, capacity: float = 1.0, m: int | None = None):
    m = traj.config.m if m is None else m
    if name == "gllg":
        return GLLGPolicy(traj, capacity, m)
    if name == "online":
        return GLLGPolicy(traj, capacity, 0)
    if name in ("dg", "glg"):
        return ReoptPolicy(traj, capacity, name)
    if name == "brute":
        return BrutePolicy(traj, capacity)
    if name == "dg_ss":
        return SlicedPolicy(traj, capacity, "dg")
    if name == "sinr_ss":
        return SlicedPolicy(traj, capacity, "sinr")
    raise ValueError(f"unknown policy {name!r}")


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Snapshot:
    time: float
    utility: float
    operator_utility: tuple
    users: int
    handoffs: int
    idle_operators: int
    rates: np.ndarray = field(repr=False)
    members: np.ndarray = field(repr=False)


def _measure(policy, traj: Trajectory, t: float) -> Snapshot:
    shares = np.asarray(traj.config.shares)
    mem = policy.members().copy()
    r = policy.user_rates()
    ops = traj.operator_of
    n_op = shares.shape[0]
    counts = np.bincount(ops[mem], minlength=n_op)
    w = np.zeros_like(r)
    w[mem] = shares[ops[mem]] / counts[ops[mem]]
    logr = np.zeros_like(r)
    logr[mem] = np.log(r[mem])
    u_o = tuple(float(logr[mem & (ops == o)].mean()) if counts[o] else float("nan")
                for o in range(n_op))
    return Snapshot(float(t), float(np.sum(w * logr)), u_o, int(mem.sum()),
                    int(policy.handoffs), int(np.count_nonzero(counts == 0)), r, mem)


@dataclass(frozen=True, eq=False)
class RunResult:
    policy: str
    snapshots: tuple
    downloads: dict = field(default_factory=dict)  # size -> ((user, start, duration), ...)

    def steady(self, warmup_fraction: float):
        k = int(np.floor(len(self.snapshots) * warmup_fraction))
        return self.snapshots[k:]

    def mean_utility(self, warmup_fraction: float) -> float:
        return float(np.mean([s.utility for s in self.steady(warmup_fraction)]))


class _Downloads:
    """Back-to-back file transfers with piecewise-constant rates."""

    def __init__(self, n_users: int, size_bits: float):
        self.size = size_bits
        self.left = np.full(n_users, size_bits)
        self.started = np.full(n_users, np.nan)
        self.done: list[tuple[int, float, float]] = []

    def start(self, u, t):
        self.left[u] = self.size
        self.started[u] = t

    def stop(self, u):
        self.started[u] = np.nan

    def advance(self, t0, t1, rates):
        dt = t1 - t0
        if dt <= 0:
            return
        busy = np.flatnonzero(~np.isnan(self.started) & (rates > 0))
        r = rates[busy]
        finish = self.left[busy] / r
        hit = finish <= dt
        self.left[busy[~hit]] -= r[~hit] * dt
        for u, rate, first in zip(busy[hit], r[hit], finish[hit]):
            u = int(u)
            t = t0 + first
            self.done.append((u, float(self.started[u]), float(t - self.started[u])))
            per_file = self.size / rate
            while t + per_file <= t1:
                self.done.append((u, float(t), float(per_file)))
                t += per_file
            self.started[u] = t
            self.left[u] = self.size - rate * (t1 - t)


def replay(traj: Trajectory, policy, downloads=None) -> RunResult:
    """Feed the trajectory's events to ``policy``; sample on the snapshot grid.

    ``downloads`` is an optional file size in bits, or a sequence of sizes.
    Every present user then downloads files of each size back to back (one
    independent transfer stream per size) and completed transfers are
    returned as ``{size: ((user, start, duration), ...)}``.
    """
    if downloads is None:
        sizes = ()
    elif np.ndim(downloads) == 0:
        sizes = (float(downloads),)
    else:
        sizes = tuple(float(d) for d in downloads)
    streams = [_Downloads(traj.n_users, size) for size in sizes]
    events = traj.events
    snaps = []
    i = 0
    t_prev = 0.0
    rates = np.zeros(traj.n_users)
    for t in traj.snapshots:
        while i < len(events) and events[i].time <= t + 1e-12:
            ev = events[i]
            for dl in streams:
                dl.advance(t_prev, ev.time, rates)
            t_prev = ev.time
            if isinstance(ev, Join):
                policy.join(ev.user, traj.rows[i], traj.sinr[i])
                for dl in streams:
                    dl.start(ev.user, ev.time)
            elif isinstance(ev, Leave):
                policy.leave(ev.user)
                for dl in streams:
                    dl.stop(ev.user)
            elif isinstance(ev, Move):
                policy.relocate(ev.user, traj.rows[i], traj.sinr[i])
            if streams and not isinstance(ev, Move):
                rates = policy.user_rates()
            i += 1
        policy.snapshot()
        snap = _measure(policy, traj, t)
        for dl in streams:
            dl.advance(t_prev, t, rates)
        t_prev = t
        rates = snap.rates
        snaps.append(snap)
    done = {dl.size: tuple(dl.done) for dl in streams}
    return RunResult(policy.name, tuple(snaps), done)


def run(config: ScenarioConfig, seed: int | None = None, policy: str | None = None,
        capacity: float | None = None, traj: Trajectory | None = None,
        downloads: float | None = None) -> RunResult:
    traj = traj or build_trajectory(config, seed)
    pol = make_policy(policy or config.policy, traj,
                      config.capacity if capacity is None else capacity)
    return replay(traj, pol, downloads)
