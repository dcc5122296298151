from __future__ import annotations

import numpy as np

from moraslice import kernels
from moraslice.model import Allocation, Association, NetworkState, SizeGuardError
from moraslice.solvers.common import UTILITY_TOL, mora_fractions

DEFAULT_LIMIT = 10**7


def search_space(state: NetworkState) -> int:
    """Number of feasible associations (product of per-user coverage counts)."""
    counts = np.count_nonzero(state.rates > 0, axis=1)
    return int(np.prod(counts.astype(object))) if counts.size else 1


def brute_force_mora(state: NetworkState, limit: int = DEFAULT_LIMIT):
    """Exact optimum by enumerating every feasible association.

    The inner allocation is the proportional-fair split, which is optimal for
    any fixed association. Among optima (within 1e-12) the lexicographically
    smallest association is returned.
    """
    state.check_coverage()
    size = search_space(state)
    if size > limit:
        raise SizeGuardError(
            f"{size} associations exceed the enumeration limit of {limit}")
    n_u, n_st = state.n_users, state.n_stations
    if n_u == 0:
        x = np.zeros(0, dtype=np.int64)
        return Association(x), Allocation(np.zeros((0, n_st))), 0.0
    w = state.weights
    feasible = state.rates > 0
    n_opts = feasible.sum(axis=1).astype(np.int64)
    options = np.zeros((n_u, int(n_opts.max())), dtype=np.int64)
    for u in range(n_u):
        opts = np.flatnonzero(feasible[u])
        options[u, :opts.size] = opts
    with np.errstate(divide="ignore"):
        terms = np.where(feasible, w[:, None] * np.log(w[:, None] * state.rates), 0.0)
    x, best = kernels.brute_force(terms, np.ascontiguousarray(w), options, n_opts,
                                  n_st, UTILITY_TOL)
    x = np.asarray(x, dtype=np.int64)
    return (Association(x), Allocation(mora_fractions(w, x, n_st)),
            float(kernels.utility(state.rates, w, x, n_st)))
