"""Greedy Local Largest Gain: semi-online handling of joins, leaves and moves.

After the triggering event, at most ``m + 1`` existing users are moved:
one rate-gain move drawn from the users of a seed set of stations, up to
``m - 1`` further rate-gain moves drawn from the two stations touched by the
previous move, and a final move chosen to maximise network utility. Without
an improving first move nothing happens; when the rate-gain moves run out
early the cascade goes straight to the utility step.
"""

from __future__ import annotations

import numpy as np

from moraslice import kernels
from moraslice.model import Association, InstanceError, NetworkState
from moraslice.solvers.common import UTILITY_TOL, SolverParams, WorkingCopy, report


def _rate_step(work: WorkingCopy, cand, eps):
    u, q, ratio = kernels.best_rate_move(work.rates, work.weights, work.x,
                                         work.loads, cand)
    if u < 0 or not ratio > 1.0 + eps + kernels.RATE_TOL:
        return None
    a = int(work.x[u])
    work.move(u, q)
    return int(q), a


def cascade(work: WorkingCopy, seed_stations, m: int, eps: float) -> bool:
    """Run the bounded reassociation cascade; True if it stopped on its own."""
    if m <= 0 or seed_stations is None:
        return True
    step = _rate_step(work, seed_stations, eps)
    if step is None:
        return True
    c, p = step
    for _ in range(m - 1):
        step = _rate_step(work, work.station_mask(c, p), eps)
        if step is None:
            # no rate gain left around {c, p}: skip to the utility step
            break
        c, p = step
    u, q, dw = kernels.best_utility_move(work.rates, work.weights, work.x,
                                         work.loads, work.station_mask(c, p))
    if u >= 0 and dw > UTILITY_TOL:
        work.move(u, q)
        return False
    return True


def leave_seed(work: WorkingCopy, b: int, eps: float):
    """Two highest-load stations holding a user who would gain by moving to ``b``."""
    users = np.flatnonzero((work.x >= 0) & (work.x != b))
    if users.size == 0:
        return None
    w = work.weights[users]
    a = work.x[users]
    new = (w * work.rates[users, b]) / (work.loads[b] + w)
    cur = (w * work.rates[users, a]) / work.loads[a]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cur > 0, new / cur, np.inf)
    gaining = (work.rates[users, b] > 0) & (ratio > 1.0 + eps + kernels.RATE_TOL)
    stations = np.unique(a[gaining])
    if stations.size == 0:
        return None
    order = np.lexsort((stations, -work.loads[stations]))
    return work.station_mask(*stations[order[:2]])


def handle_join(work: WorkingCopy, v: int, m: int, eps: float) -> bool:
    b = work.join_target(v)
    if b < 0:
        raise InstanceError("joining user has no coverage")
    work.place(v, b)
    work.start_trace()
    return cascade(work, work.station_mask(b), m, eps)


def handle_leave(work: WorkingCopy, b: int, m: int, eps: float) -> bool:
    return cascade(work, leave_seed(work, b, eps), m, eps)


def best_alternative(work: WorkingCopy, v: int):
    a = work.x[v]
    w = work.weights[v]
    c = work.rates[v]
    new = np.where(c > 0, (w * c) / (work.loads + w), -1.0)
    new[a] = -1.0
    q = int(np.argmax(new))
    if new[q] <= 0:
        return -1, 0.0
    cur = w * c[a] / work.loads[a]
    return q, (new[q] / cur if cur > 0 else np.inf)


def handle_move(work: WorkingCopy, v: int, m: int, eps: float) -> bool:
    q, ratio = best_alternative(work, v)
    if q < 0 or not ratio > 1.0 + eps + kernels.RATE_TOL:
        return True
    a = int(work.x[v])
    work.move(v, q)
    done_leave = handle_leave(work, a, m, eps)
    done_join = cascade(work, work.station_mask(q), m, eps)
    return done_leave and done_join


def _params(params):
    return params or SolverParams()


def gllg_join(state: NetworkState, x, v, params: SolverParams | None = None):
    """Associate the new user ``v`` and rebalance around her station.

    ``state`` already contains ``v`` (weights include her); ``x`` covers all
    users of ``state`` with ``-1`` for ``v``, or all users except ``v``.
    """
    params = _params(params)
    i = state.index_of(v)
    arr = np.asarray(x.x if isinstance(x, Association) else x, dtype=np.int64)
    if arr.shape[0] == state.n_users - 1:
        arr = np.insert(arr, i, -1)
    arr = arr.copy()
    arr[i] = -1
    others = np.delete(arr, i)
    if np.any(others < 0) or np.any(others >= state.n_stations):
        raise InstanceError("association of existing users is incomplete")
    work = WorkingCopy(state.rates, state.weights, arr)
    done = handle_join(work, i, params.m, params.hysteresis)
    return report(state, work, reassociations=len(work.moves), converged=done)


def gllg_leave(state: NetworkState, x: Association, v, params: SolverParams | None = None):
    """Remove ``v`` and rebalance; the report carries the reduced state."""
    params = _params(params)
    i = state.index_of(v)
    x.validate(state)
    b = int(x.x[i])
    new_state = state.without_user(v)
    work = WorkingCopy(new_state.rates, new_state.weights, np.delete(x.x, i))
    work.start_trace()
    done = handle_leave(work, b, params.m, params.hysteresis)
    return report(new_state, work, reassociations=len(work.moves), converged=done,
                  out_state=new_state)


def gllg_move(state: NetworkState, x: Association, v, new_rates,
              params: SolverParams | None = None):
    """Update ``v``'s rate row; hand her over if another station now beats hers."""
    params = _params(params)
    i = state.index_of(v)
    x.validate(state)
    new_state = state.with_rates(v, np.asarray(new_rates, dtype=float))
    new_state.check_coverage()
    work = WorkingCopy(new_state.rates, new_state.weights, x.x)
    work.start_trace()
    done = handle_move(work, i, params.m, params.hysteresis)
    return report(new_state, work, reassociations=len(work.moves), converged=done,
                  out_state=new_state)
