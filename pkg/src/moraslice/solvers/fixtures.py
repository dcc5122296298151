"""Instance generators for the hardness and online-gap constructions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from moraslice.events import EventStream, Join, Leave
from moraslice.model import Association, InstanceError, NetworkState
from moraslice.solvers.common import WorkingCopy


def matching_utility(n: int, m: int, rate: float) -> float:
    """Utility of the 3DM instance when a perfect matching exists."""
    return (n / m) * math.log(rate / 2) + ((m - n) / m) * math.log(rate)


def _validate_triples(triples, n):
    if n < 1:
        raise InstanceError("3DM needs n >= 1")
    if len(set(triples)) != len(triples):
        raise InstanceError("duplicate triples")
    if len(triples) < n:
        raise InstanceError("3DM needs m >= n triples")
    for t in triples:
        if len(t) != 3 or any(not 0 <= e < n for e in t):
            raise InstanceError(f"malformed triple {t!r}")
    for k in range(3):
        missing = set(range(n)) - {t[k] for t in triples}
        if missing:
            raise InstanceError(f"elements {sorted(missing)} of coordinate {k} "
                                "appear in no triple")


def build_3dm_instance(triples, rate: float, n: int | None = None) -> NetworkState:
    """Association instance whose optimum reveals whether ``triples`` has a matching.

    Station ``i`` stands for triple ``i``. The ``2n`` element users (the D and E
    coordinates) reach the stations of triples containing their element; a
    type-``j`` dummy reaches the stations of triples whose first coordinate is
    ``j``. Element users get weight ``1/(2m)`` and dummies ``1/m`` by giving the
    element operator share ``n/m`` and the dummy operator ``(m - n)/m``.
    """
    triples = [tuple(int(e) for e in t) for t in triples]
    if n is None:
        n = 1 + max(max(t) for t in triples)
    _validate_triples(triples, n)
    m = len(triples)
    rows, ops = [], []
    for coord in (1, 2):
        for e in range(n):
            rows.append([rate if t[coord] == e else 0.0 for t in triples])
            ops.append(0)
    for j in range(n):
        t_j = sum(1 for t in triples if t[0] == j)
        for _ in range(t_j - 1):
            rows.append([rate if t[0] == j else 0.0 for t in triples])
            ops.append(1)
    if m == n:
        shares = [1.0]
    else:
        shares = [n / m, (m - n) / m]
    return NetworkState.build(shares, ops, np.array(rows))


def has_3dm_matching(triples, n: int) -> bool:
    """Exhaustive search for ``n`` disjoint triples covering every element."""
    for sub in itertools.combinations(triples, n):
        if all(len({t[k] for t in sub}) == n for k in range(3)):
            return True
    return False


def random_3dm_family(n: int, m: int, rng: np.random.Generator):
    """Random valid family: every element of every coordinate used at least once."""
    if m < n:
        raise ValueError("m must be >= n")
    if m > n ** 3:
        raise ValueError("m exceeds the number of distinct triples")
    while True:
        fam = set()
        # one triple per element index along a random permutation pairing
        perm = [rng.permutation(n) for _ in range(3)]
        for i in range(n):
            if rng.random() < 0.5:
                fam.add((int(perm[0][i]), int(perm[1][i]), int(perm[2][i])))
        while len(fam) < m:
            fam.add(tuple(int(v) for v in rng.integers(0, n, size=3)))
        fam = sorted(fam)
        try:
            _validate_triples(fam, n)
        except InstanceError:
            continue
        return fam


@dataclass(frozen=True)
class OnlineScript:
    num_stations: int
    events: EventStream
    rates: np.ndarray  # every user reaches every station at rate 1


def _online_join(work: WorkingCopy, u: int):
    work.place(u, work.join_target(u))


def online_worst_case_fixture(num_stations: int) -> OnlineScript:
    """``|B|^2`` unit-rate users join, then all but one crowded station's users leave.

    The departures are chosen against the deterministic no-reassociation
    policy (best station on arrival, lowest index on ties).
    """
    if num_stations < 2:
        raise ValueError("num_stations must be >= 2")
    nb = num_stations
    n = nb * nb
    rates = np.ones((n, nb))
    # equal weights throughout: scale does not change best-station choices
    work = WorkingCopy(rates, np.ones(n), np.full(n, -1))
    events = [Join(0.0, u, 0) for u in range(n)]
    for u in range(n):
        _online_join(work, u)
    counts = np.bincount(work.x, minlength=nb)
    crowded = int(np.flatnonzero(counts >= nb)[0])
    stay = np.flatnonzero(work.x == crowded)[:nb]
    events += [Leave(1.0, u) for u in range(n) if u not in set(stay.tolist())]
    return OnlineScript(nb, EventStream(events), rates)


def replay_online(script: OnlineScript):
    """Replay through the no-reassociation policy; returns (state, association)."""
    present: list[int] = []
    station: dict[int, int] = {}
    nb = script.num_stations
    for ev in script.events:
        if isinstance(ev, Join):
            loads = np.zeros(nb)
            w = 1.0 / (len(present) + 1)
            for u in present:
                loads[station[u]] += w
            gain = script.rates[ev.user] * w / (loads + w)
            station[ev.user] = int(np.argmax(gain))
            present.append(ev.user)
        elif isinstance(ev, Leave):
            present.remove(ev.user)
            del station[ev.user]
    state = NetworkState.build([1.0], [0] * len(present), script.rates[present],
                               user_ids=present)
    return state, Association(np.array([station[u] for u in present], dtype=np.int64))
