"""Per-station allocations for a fixed association.

``mora_allocation`` shares each station among its users in proportion to
their weights. ``ss_allocation`` is the static-slicing baseline: every
operator owns the fraction ``s_o`` of every station and splits it equally
among its own users there.
"""

from __future__ import annotations

import numpy as np

from moraslice.model import Allocation, Association, NetworkState, SizeGuardError
from moraslice.solvers.common import mora_fractions

ENUMERATION_LIMIT = 10**7


def mora_allocation(state: NetworkState, x: Association) -> Allocation:
    return Allocation(mora_fractions(state.weights, x.x, state.n_stations))


def ss_allocation(state: NetworkState, x: Association) -> Allocation:
    n_st = state.n_stations
    n_op = len(state.operators)
    counts = np.zeros((n_op, n_st))
    np.add.at(counts, (state.user_op, x.x), 1.0)
    shares = np.array([o.share for o in state.operators])
    f = np.zeros(state.rates.shape)
    rows = np.arange(state.n_users)
    f[rows, x.x] = shares[state.user_op] / counts[state.user_op, x.x]
    return Allocation(f)


def slice_state(state: NetworkState, o) -> NetworkState:
    """Operator ``o`` alone on its slice: share 1, rates scaled by ``s_o``."""
    k = state.operator_index(o)
    members = state.operator_members(o)
    if members.size == 0:
        raise ValueError(f"operator {o!r} has no users")
    share = state.operators[k].share
    users = [state.users[i] for i in members]
    return NetworkState.build(
        [1.0], [0] * members.size, state.rates[members] * share,
        user_ids=[u.id for u in users], station_ids=state.base_stations,
        operator_ids=[o],
        sinr=None if state.sinr is None else state.sinr[members])


def ss_optimize(state: NetworkState, o, method: str = "greedy", params=None):
    """Best association of operator ``o``'s users inside its fixed slice.

    Returns ``(x_o, f_o)`` over the sub-instance returned by
    :func:`slice_state` (rows follow ``state.operator_members(o)``); ``f_o``
    is the static-slicing allocation expressed as fractions of each whole
    station, so its per-station sums equal ``s_o`` where ``o`` is present.
    """
    from moraslice.solvers import brute_force_mora, distributed_greedy

    sub = slice_state(state, o)
    if method == "exact":
        x_o, _, _ = brute_force_mora(sub, limit=ENUMERATION_LIMIT)
    elif method == "greedy":
        x_o = distributed_greedy(sub, None, params).final_association
    else:
        raise ValueError(f"unknown method {method!r}")
    share = state.operators[state.operator_index(o)].share
    f_sub = mora_fractions(sub.weights, x_o.x, sub.n_stations) * share
    return x_o, Allocation(f_sub)


def ss_operator_utility(state: NetworkState, o, x_o: Association) -> float:
    """Operator utility of ``o`` under static slicing for its own association."""
    sub = slice_state(state, o)
    counts = np.bincount(x_o.x, minlength=sub.n_stations)
    r = sub.rates[np.arange(sub.n_users), x_o.x] / counts[x_o.x]
    return float(np.mean(np.log(r)))
