from __future__ import annotations

import numpy as np

from moraslice import kernels
from moraslice.model import Association, InstanceError, NetworkState
from moraslice.solvers.common import SolverParams, WorkingCopy, report


def _working_copy(state: NetworkState, x0: Association | None) -> WorkingCopy:
    state.check_coverage()
    if x0 is None:
        return greedy_insertion(state)
    x0.validate(state)
    return WorkingCopy(state.rates, state.weights, x0.x)


def greedy_insertion(state: NetworkState) -> WorkingCopy:
    """Users join in row order, each on her best station given current loads."""
    work = WorkingCopy(state.rates, state.weights, np.full(state.n_users, -1))
    for u in range(state.n_users):
        b = work.join_target(u)
        if b < 0:
            raise InstanceError(f"user {state.users[u].id!r} has no coverage")
        work.place(u, b)
    return work


def distributed_greedy(state: NetworkState, x0: Association | None = None,
                       params: SolverParams | None = None):
    """Best-response dynamics, sweeping users in row order.

    A user moves when her best alternative beats her current rate by a
    factor strictly above ``1 + hysteresis``. Hitting the move cap is not an
    error; the report's ``converged`` flag is False instead.
    """
    params = params or SolverParams()
    work = _working_copy(state, x0)
    cap = params.move_cap(state.n_users)
    trace, n, converged = kernels.distributed_greedy(
        work.rates, work.weights, work.x, work.loads, params.hysteresis, cap)
    work.trace = list(trace[:n + 1])
    return report(state, work, reassociations=int(n), converged=bool(converged))


def greedy_largest_gain(state: NetworkState, x0: Association | None = None,
                        params: SolverParams | None = None):
    """Each iteration moves the user with the largest ``r_new / r_old``."""
    params = params or SolverParams()
    work = _working_copy(state, x0)
    cap = params.move_cap(state.n_users)
    trace, gains, n, converged = kernels.greedy_largest_gain(
        work.rates, work.weights, work.x, work.loads, params.hysteresis, cap)
    work.trace = list(trace[:n + 1])
    return report(state, work, reassociations=int(n), converged=bool(converged),
                  gains=gains[:n])


def sinr_association(state: NetworkState) -> Association:
    """Every user on her highest-SINR station (rates stand in when SINR is absent)."""
    metric = state.sinr if state.sinr is not None else state.rates
    return Association(np.argmax(metric, axis=1).astype(np.int64))


def is_equilibrium(state: NetworkState, x: Association, eps: float = 0.0) -> bool:
    """No user can raise her own rate by a unilateral move (exhaustive scan)."""
    w = state.weights
    loads = np.bincount(x.x, weights=w, minlength=state.n_stations)
    for u in range(state.n_users):
        a = x.x[u]
        cur = w[u] * state.rates[u, a] / loads[a]
        for q in range(state.n_stations):
            if q == a or state.rates[u, q] <= 0:
                continue
            new = w[u] * state.rates[u, q] / (loads[q] + w[u])
            if new > cur * (1 + eps + kernels.RATE_TOL):
                return False
    return True
