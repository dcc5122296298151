"""Problem instance: operators, users, stations, rates, association, allocation.

Utilities are in nats. ``W = sum_u w_u ln r_u`` with ``w_u = s_o / |U_o|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SHARE_TOL = 1e-9


class InstanceError(ValueError):
    """Malformed instance (bad shares, dangling references, no coverage)."""


class InfeasibleAllocation(ValueError):
    """A user has zero rate, so the log utility is undefined."""


class SizeGuardError(ValueError):
    """Exhaustive enumeration requested beyond the configured limit."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Operator:
    id: int
    share: float
    user_ids: frozenset = frozenset()


@dataclass(frozen=True)
class User:
    id: int
    operator_id: int
    weight: float
    position: tuple[float, float] | None = None


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Full-station rates in bits/s; rows follow the user order of the state."""

    c: np.ndarray

    def __post_init__(self):
        c = _frozen(self.c, float)
        if c.ndim != 2:
            raise InstanceError("rate matrix must be 2-D")
        if np.any(~np.isfinite(c)) or np.any(c < 0):
            raise InstanceError("rates must be finite and non-negative")
        object.__setattr__(self, "c", c)

    @property
    def shape(self):
        return self.c.shape


@dataclass(frozen=True, eq=False)
class Association:
    """Station index (column of the rate matrix) for every user row."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x, np.int64))

    def station_of(self, state: NetworkState, user_id) -> int:
        return state.base_stations[int(self.x[state.index_of(user_id)])]

    def validate(self, state: NetworkState) -> None:
        if self.x.shape != (state.n_users,):
            raise InstanceError("association must cover every user exactly once")
        if np.any(self.x < 0) or np.any(self.x >= state.n_stations):
            raise InstanceError("association references an unknown station")
        if np.any(state.rates[np.arange(state.n_users), self.x] <= 0):
            raise InstanceError("user associated with a station giving zero rate")

    def __eq__(self, other):
        return isinstance(other, Association) and np.array_equal(self.x, other.x)

    def __hash__(self):
        return hash(self.x.tobytes())


@dataclass(frozen=True, eq=False)
class Allocation:
    """Resource fractions ``f[u, b]``; non-zero only on the associated column."""

    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", _frozen(self.f, float))

    def validate(self, state: NetworkState, x: Association) -> None:
        if self.f.shape != state.rates.shape:
            raise InstanceError("allocation shape does not match the rate matrix")
        if np.any(self.f < 0) or np.any(self.f > 1 + SHARE_TOL):
            raise InstanceError("fractions must lie in [0, 1]")
        if np.any(self.f.sum(axis=0) > 1 + SHARE_TOL):
            raise InstanceError("a station allocates more than its resources")
        off = np.ones_like(self.f, dtype=bool)
        off[np.arange(state.n_users), x.x] = False
        if np.any(self.f[off] > 0):
            raise InstanceError("resources given on a non-associated station")


@dataclass(frozen=True, eq=False)
class NetworkState:
    operators: tuple[Operator, ...]
    users: tuple[User, ...]
    base_stations: tuple
    rate_matrix: RateMatrix
    sinr: np.ndarray | None = None
    idle_operators: tuple = ()
    _index: dict = field(default_factory=dict, repr=False)
    _op_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        shares = [o.share for o in self.operators]
        if not self.operators:
            raise InstanceError("at least one operator is required")
        if any(not (0 < s <= 1) for s in shares):
            raise InstanceError("operator shares must lie in (0, 1]")
        if abs(sum(shares) - 1.0) > SHARE_TOL:
            raise InstanceError(f"shares sum to {sum(shares)!r}, expected 1")
        op_ids = [o.id for o in self.operators]
        if len(set(op_ids)) != len(op_ids):
            raise InstanceError("duplicate operator id")
        index = {}
        for i, u in enumerate(self.users):
            if u.id in index:
                raise InstanceError(f"duplicate user id {u.id!r}")
            index[u.id] = i
        op_index = {o.id: k for k, o in enumerate(self.operators)}
        seen = set()
        for o in self.operators:
            if o.user_ids & seen:
                raise InstanceError("operators' user sets overlap")
            seen |= o.user_ids
        for u in self.users:
            if u.operator_id not in op_index:
                raise InstanceError(f"user {u.id!r} references unknown operator")
            if u.id not in self.operators[op_index[u.operator_id]].user_ids:
                raise InstanceError(f"user {u.id!r} missing from its operator")
            if not u.weight > 0:
                raise InstanceError(f"user {u.id!r} has non-positive weight")
        if seen - set(index):
            raise InstanceError("operator lists a user that does not exist")
        if self.rate_matrix.shape != (len(self.users), len(self.base_stations)):
            raise InstanceError("rate matrix shape does not match users x stations")
        if len(set(self.base_stations)) != len(self.base_stations):
            raise InstanceError("duplicate station id")
        if self.sinr is not None:
            object.__setattr__(self, "sinr", _frozen(self.sinr, float))
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_op_index", op_index)
        object.__setattr__(self, "weights", _frozen([u.weight for u in self.users], float))
        object.__setattr__(self, "user_op", _frozen(
            [op_index[u.operator_id] for u in self.users], np.int64))

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, shares: Sequence[float], user_operator: Sequence[int], rates,
              *, user_ids: Sequence | None = None,
              station_ids: Sequence | None = None,
              operator_ids: Sequence | None = None,
              positions: Sequence | None = None,
              sinr=None) -> NetworkState:
        """Instance from shares, per-user operator index and a rate matrix.

        Weights follow ``s_o / |U_o|``; operators without users are recorded
        in ``idle_operators`` and hold no weight.
        """
        rates = np.asarray(rates, dtype=float)
        n_u = len(user_operator)
        user_ids = list(range(n_u)) if user_ids is None else list(user_ids)
        station_ids = (list(range(rates.shape[1])) if station_ids is None
                       else list(station_ids))
        operator_ids = (list(range(len(shares))) if operator_ids is None
                        else list(operator_ids))
        members = {k: [] for k in range(len(shares))}
        for uid, k in zip(user_ids, user_operator):
            if not 0 <= k < len(shares):
                raise InstanceError(f"user {uid!r} references unknown operator")
            members[k].append(uid)
        ops = tuple(Operator(operator_ids[k], float(shares[k]), frozenset(members[k]))
                    for k in range(len(shares)))
        weights = compute_weights_raw(shares, user_operator)
        users = tuple(
            User(uid, operator_ids[k], float(weights[i]),
                 None if positions is None else tuple(map(float, positions[i])))
            for i, (uid, k) in enumerate(zip(user_ids, user_operator)))
        idle = tuple(operator_ids[k] for k in range(len(shares)) if not members[k])
        return cls(ops, users, tuple(station_ids), RateMatrix(rates), sinr=sinr,
                   idle_operators=idle)

    def without_user(self, user_id) -> NetworkState:
        keep = [i for i, u in enumerate(self.users) if u.id != user_id]
        if len(keep) == self.n_users:
            raise KeyError(user_id)
        return self._subset(keep)

    def with_rates(self, user_id, row) -> NetworkState:
        i = self.index_of(user_id)
        c = self.rates.copy()
        c[i] = row
        return self._rebuild(np.arange(self.n_users), c)

    def _subset(self, keep) -> NetworkState:
        keep = np.asarray(keep, dtype=np.int64)
        return self._rebuild(keep, self.rates[keep])

    def _rebuild(self, keep, rates) -> NetworkState:
        users = [self.users[i] for i in keep]
        return NetworkState.build(
            [o.share for o in self.operators],
            [self._op_index[u.operator_id] for u in users], rates,
            user_ids=[u.id for u in users], station_ids=self.base_stations,
            operator_ids=[o.id for o in self.operators],
            positions=None if any(u.position is None for u in users)
            else [u.position for u in users],
            sinr=None if self.sinr is None else self.sinr[keep])

    # -- accessors ---------------------------------------------------------

    @property
    def rates(self) -> np.ndarray:
        return self.rate_matrix.c

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_stations(self) -> int:
        return len(self.base_stations)

    def index_of(self, user_id) -> int:
        try:
            return self._index[user_id]
        except KeyError:
            raise KeyError(f"unknown user id {user_id!r}") from None

    def operator_index(self, operator_id) -> int:
        try:
            return self._op_index[operator_id]
        except KeyError:
            raise KeyError(f"unknown operator id {operator_id!r}") from None

    def operator_members(self, operator_id) -> np.ndarray:
        return np.flatnonzero(self.user_op == self.operator_index(operator_id))

    def check_coverage(self) -> None:
        dead = np.flatnonzero(~np.any(self.rates > 0, axis=1))
        if dead.size:
            ids = [self.users[i].id for i in dead]
            raise InstanceError(f"users without coverage: {ids}")


def compute_weights_raw(shares: Sequence[float], user_operator: Sequence[int]) -> np.ndarray:
    user_operator = np.asarray(user_operator, dtype=np.int64)
    if user_operator.size == 0:
        return np.zeros(0)
    counts = np.bincount(user_operator, minlength=len(shares))
    return np.asarray(shares, dtype=float)[user_operator] / counts[user_operator]


def compute_weights(state: NetworkState) -> dict:
    """``{user_id: s_o / |U_o|}``; idle operators contribute nothing."""
    shares = [o.share for o in state.operators]
    w = compute_weights_raw(shares, state.user_op)
    return {u.id: float(wi) for u, wi in zip(state.users, w)}


def _rates(state: NetworkState, x: Association, f: Allocation) -> np.ndarray:
    rows = np.arange(state.n_users)
    return f.f[rows, x.x] * state.rates[rows, x.x]


def user_rate(state: NetworkState, x: Association, f: Allocation, u) -> float:
    i = state.index_of(u)
    b = int(x.x[i])
    return float(f.f[i, b] * state.rates[i, b])


def user_rates(state: NetworkState, x: Association, f: Allocation) -> np.ndarray:
    return _rates(state, x, f)


def network_utility(state: NetworkState, x: Association, f: Allocation) -> float:
    r = _rates(state, x, f)
    if np.any(r <= 0):
        bad = [state.users[i].id for i in np.flatnonzero(r <= 0)]
        raise InfeasibleAllocation(f"zero rate for users {bad}")
    return float(np.sum(state.weights * np.log(r)))


def operator_utility(state: NetworkState, x: Association, f: Allocation, o) -> float:
    members = state.operator_members(o)
    if members.size == 0:
        raise InfeasibleAllocation(f"operator {o!r} has no users")
    r = _rates(state, x, f)[members]
    if np.any(r <= 0):
        raise InfeasibleAllocation(f"zero rate within operator {o!r}")
    return float(np.mean(np.log(r)))


def operator_utilities(state: NetworkState, x: Association, f: Allocation) -> dict:
    return {o.id: operator_utility(state, x, f, o.id)
            for o in state.operators if o.user_ids}


def make_state(rates, **kw) -> NetworkState:
    """Single-operator convenience constructor used in tests and fixtures."""
    rates = np.asarray(rates, dtype=float)
    return NetworkState.build([1.0], [0] * rates.shape[0], rates, **kw)


def iter_associations(state: NetworkState) -> Iterable[Association]:
    """All feasible associations in lexicographic order (small instances only)."""
    import itertools

    opts = [np.flatnonzero(state.rates[i] > 0) for i in range(state.n_users)]
    for combo in itertools.product(*opts):
        yield Association(np.array(combo, dtype=np.int64))
