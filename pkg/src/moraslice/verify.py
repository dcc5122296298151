"""Randomised property suites behind ``moraslice --verify``.

Each check receives a small random instance and returns ``None`` or a short
description of the violated property. Failing instances are serialised so
they can be replayed with :func:`instance_from_dict`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from moraslice.allocation import mora_allocation, ss_allocation, ss_operator_utility, ss_optimize
from moraslice.model import Allocation, Association, NetworkState, network_utility, operator_utility
from moraslice.solvers import (
    brute_force_mora,
    distributed_greedy,
    gllg_join,
    greedy_largest_gain,
    is_equilibrium,
    search_space,
)
from moraslice.solvers.common import SolverParams

SLACK = 1e-9
SUITES = ("theorems", "oracle", "all")


@dataclass(frozen=True)
class Violation:
    check: str
    message: str
    instance: dict


def random_instance(rng: np.random.Generator, max_users: int = 8, max_stations: int = 3,
                    max_operators: int = 3, zero_prob: float = 0.2) -> NetworkState:
    """Random instance; every operator gets a user and every user some coverage."""
    n_u = int(rng.integers(1, max_users + 1))
    n_b = int(rng.integers(1, max_stations + 1))
    n_o = int(rng.integers(1, min(max_operators, n_u) + 1))
    shares = rng.uniform(0.1, 1.0, n_o)
    shares = shares / shares.sum()
    ops = np.concatenate([np.arange(n_o), rng.integers(0, n_o, n_u - n_o)])
    rates = rng.uniform(0.5, 20.0, (n_u, n_b)) * (rng.random((n_u, n_b)) >= zero_prob)
    for u in range(n_u):
        if not np.any(rates[u] > 0):
            rates[u, rng.integers(n_b)] = rng.uniform(0.5, 20.0)
    return NetworkState.build(shares, ops.tolist(), rates)


def instance_to_dict(state: NetworkState) -> dict:
    return {
        "shares": [o.share for o in state.operators],
        "user_operator": state.user_op.tolist(),
        "rates": state.rates.tolist(),
    }


def instance_from_dict(d: dict) -> NetworkState:
    return NetworkState.build(d["shares"], d["user_operator"], np.array(d["rates"]))


def random_association(state: NetworkState, rng) -> Association:
    x = [rng.choice(np.flatnonzero(state.rates[u] > 0)) for u in range(state.n_users)]
    return Association(np.array(x, dtype=np.int64))


# ---------------------------------------------------------------------------
# bound checks (the "theorems" suite)
# ---------------------------------------------------------------------------

def check_allocations(state, rng, corrupt: float = 1.0):
    x = random_association(state, rng)
    for name, f in (("mora", mora_allocation(state, x)), ("ss", ss_allocation(state, x))):
        f = Allocation(f.f * corrupt)
        try:
            f.validate(state, x)
        except ValueError as exc:
            return f"{name} allocation invalid for x={x.x.tolist()}: {exc}"
    return None


def check_sharing_beats_slicing(state, rng):
    """For a fixed association every operator does at least as well when sharing."""
    x = random_association(state, rng)
    fm, fs = mora_allocation(state, x), ss_allocation(state, x)
    for o in state.operators:
        if not o.user_ids:
            continue
        um = operator_utility(state, x, fm, o.id)
        us = operator_utility(state, x, fs, o.id)
        if um < us - 1e-12:
            return f"operator {o.id}: shared {um!r} < sliced {us!r} for x={x.x.tolist()}"
    return None


def check_equilibrium_bound(state, rng):
    rep = distributed_greedy(state)
    _, _, w_opt = brute_force_mora(state)
    if rep.converged and rep.utility < w_opt - 1.0 - SLACK:
        return f"DG equilibrium W={rep.utility!r} below optimum {w_opt!r} - 1"
    if rep.converged and not is_equilibrium(state, rep.final_association):
        return "DG reported convergence at a non-equilibrium"
    return None


def check_largest_gain_trace(state, rng):
    rep = greedy_largest_gain(state)
    _, _, w_opt = brute_force_mora(state)
    tr, gains = rep.utility_trace, rep.gain_trace
    for i, g in enumerate(gains):
        if g >= math.e and not tr[i + 1] > tr[i]:
            return f"move {i} with gain {g!r} did not raise W"
    floor = w_opt - (2.0 + float(state.weights.max()))
    entered = False
    for w in tr:
        entered = entered or w >= w_opt - 2.0
        if entered and w < floor - SLACK:
            return f"trace fell to {w!r} below {floor!r} after reaching the 2-nat region"
    return None


def check_operator_bounds(state, rng):
    """Unilateral deviations of one operator and the sliced optimum gain at most 1 nat."""
    if search_space(state) > 20000:
        return None
    x_opt, f_opt, _ = brute_force_mora(state)
    for o in state.operators:
        rows = state.operator_members(o.id)
        if rows.size == 0 or rows.size > 4:
            continue
        u_opt = operator_utility(state, x_opt, f_opt, o.id)
        opts = [np.flatnonzero(state.rates[u] > 0) for u in rows]
        for combo in itertools.product(*opts):
            x = x_opt.x.copy()
            x[rows] = combo
            xa = Association(x)
            u_dev = operator_utility(state, xa, mora_allocation(state, xa), o.id)
            if u_opt - u_dev < -1.0 - SLACK:
                return f"operator {o.id} gains {u_dev - u_opt!r} by deviating to {combo}"
        x_ss, _ = ss_optimize(state, o.id, method="exact")
        u_ss = ss_operator_utility(state, o.id, x_ss)
        if u_opt - u_ss < -1.0 - SLACK:
            return f"operator {o.id}: sliced optimum beats sharing by {u_ss - u_opt!r}"
    return None


# ---------------------------------------------------------------------------
# oracle checks
# ---------------------------------------------------------------------------

def check_brute_force_oracle(state, rng):
    x, f, w = brute_force_mora(state)
    best = -math.inf
    opts = [np.flatnonzero(state.rates[u] > 0) for u in range(state.n_users)]
    for combo in itertools.product(*opts):
        xa = Association(np.array(combo, dtype=np.int64))
        best = max(best, network_utility(state, xa, mora_allocation(state, xa)))
    if abs(best - w) > SLACK:
        return f"brute force W={w!r} but enumeration finds {best!r}"
    return None


def check_heuristics_below_optimum(state, rng):
    _, _, w_opt = brute_force_mora(state)
    found = {
        "dg": distributed_greedy(state).utility,
        "glg": greedy_largest_gain(state).utility,
    }
    # GLLG: users join one after another
    x = np.full(state.n_users, -1, dtype=np.int64)
    params = SolverParams(m=3)
    for v in range(state.n_users):
        part = NetworkState.build(
            [o.share for o in state.operators], state.user_op[: v + 1].tolist(),
            state.rates[: v + 1])
        rep = gllg_join(part, x[: v + 1], v, params)
        x[: v + 1] = rep.final_association.x
    found["gllg"] = network_utility(state, Association(x), mora_allocation(state, Association(x)))
    for name, w in found.items():
        if w > w_opt + SLACK:
            return f"{name} W={w!r} exceeds the optimum {w_opt!r}"
    return None


THEOREM_CHECKS = {
    "allocations_valid": check_allocations,
    "sharing_beats_slicing": check_sharing_beats_slicing,
    "equilibrium_bound": check_equilibrium_bound,
    "largest_gain_trace": check_largest_gain_trace,
    "operator_bounds": check_operator_bounds,
}
ORACLE_CHECKS = {
    "brute_force_oracle": check_brute_force_oracle,
    "heuristics_below_optimum": check_heuristics_below_optimum,
}


def run_suite(suite: str, instances: int, seed: int, inject_fault: bool = False):
    """Returns ``(checks_run, violations)``; stops at the first violation."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    if instances < 1:
        raise ValueError("instances must be >= 1")
    checks = {}
    if suite in ("theorems", "all"):
        checks.update(THEOREM_CHECKS)
    if suite in ("oracle", "all"):
        checks.update(ORACLE_CHECKS)
    if inject_fault:
        checks["allocations_valid"] = lambda s, r: check_allocations(s, r, corrupt=1.5)
    run = 0
    for i in range(instances):
        rng = np.random.default_rng([seed, 61, i])
        state = random_instance(rng)
        for name, check in checks.items():
            msg = check(state, np.random.default_rng([seed, 62, i]))
            run += 1
            if msg is not None:
                return run, [Violation(name, msg, instance_to_dict(state))]
    return run, []
