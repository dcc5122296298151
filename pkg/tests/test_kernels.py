"""Numba and numpy kernels must agree; the numpy path is also run end to end."""

import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from moraslice import kernels
from moraslice.verify import random_association, random_instance


def _case(seed):
    rng = np.random.default_rng(seed)
    s = random_instance(rng, max_users=9, max_stations=4, zero_prob=0.2)
    x = random_association(s, rng).x.copy()
    # a few absent slots, as in the live simulator
    if s.n_users > 2:
        x[rng.integers(s.n_users)] = -1
    w = s.weights.copy()
    loads = np.bincount(x[x >= 0], weights=w[x >= 0], minlength=s.n_stations)
    cand = rng.random(s.n_stations) < 0.7
    return s.rates.copy(), w, x, loads, cand


@pytest.mark.parametrize("seed", range(40))
def test_single_step_kernels_agree(seed):
    rates, w, x, loads, cand = _case(seed)
    nb_s = rates.shape[1]
    assert kernels.utility_nb(rates, w, x, nb_s) == pytest.approx(
        kernels.utility_np(rates, w, x, nb_s), abs=1e-12)
    a = kernels.best_rate_move_nb(rates, w, x, loads, cand)
    b = kernels.best_rate_move_np(rates, w, x, loads, cand)
    assert a[:2] == b[:2]
    assert a[2] == pytest.approx(b[2], rel=1e-12)
    a = kernels.best_utility_move_nb(rates, w, x, loads, cand)
    b = kernels.best_utility_move_np(rates, w, x, loads, cand)
    assert a[:2] == b[:2]
    assert a[2] == pytest.approx(b[2], abs=1e-12)


@pytest.mark.parametrize("seed", range(40))
def test_dynamics_kernels_agree(seed):
    rates, w, x, loads, _ = _case(seed)
    x[x < 0] = np.argmax(rates[x < 0], axis=1)
    loads = np.bincount(x, weights=w, minlength=rates.shape[1])
    for nb_fn, np_fn in ((kernels.distributed_greedy_nb, kernels.distributed_greedy_np),
                         (kernels.greedy_largest_gain_nb, kernels.greedy_largest_gain_np)):
        x1, l1, x2, l2 = x.copy(), loads.copy(), x.copy(), loads.copy()
        r1 = nb_fn(rates, w, x1, l1, 0.0, 500)
        r2 = np_fn(rates, w, x2, l2, 0.0, 500)
        n = r1[-2]
        assert n == r2[-2] and r1[-1] == r2[-1]
        assert np.array_equal(x1, x2)
        assert np.allclose(r1[0][: n + 1], r2[0][: n + 1], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_brute_force_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    s = random_instance(rng, max_users=7, max_stations=3)
    w = s.weights
    feas = s.rates > 0
    n_opts = feas.sum(axis=1).astype(np.int64)
    options = np.zeros((s.n_users, int(n_opts.max())), dtype=np.int64)
    for u in range(s.n_users):
        o = np.flatnonzero(feas[u])
        options[u, : o.size] = o
    with np.errstate(divide="ignore"):
        terms = np.where(feas, w[:, None] * np.log(w[:, None] * s.rates), 0.0)
    xa, wa = kernels.brute_force_nb(terms, w, options, n_opts, s.n_stations, 1e-12)
    xb, wb = kernels.brute_force_np(terms, w, options, n_opts, s.n_stations, 1e-12, chunk=7)
    assert np.array_equal(xa, xb)
    assert wa == pytest.approx(wb, abs=1e-12)


def test_numpy_path_end_to_end():
    code = textwrap.dedent("""
        import numpy as np
        from moraslice import _accel, kernels
        from moraslice.solvers import brute_force_mora, distributed_greedy
        from moraslice.verify import random_instance
        assert not _accel.USE_NUMBA
        assert kernels.utility is kernels.utility_np
        s = random_instance(np.random.default_rng(5), max_users=6)
        print(repr(distributed_greedy(s).utility), repr(brute_force_mora(s)[2]))
    """)
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, MORASLICE_NUMBA=flag)
        if flag == "1":
            code_run = code.replace("assert not _accel.USE_NUMBA", "").replace(
                "assert kernels.utility is kernels.utility_np", "")
        else:
            code_run = code
        res = subprocess.run([sys.executable, "-c", code_run], env=env, capture_output=True,
                             text=True, check=True)
        outs.append([float(v) for v in res.stdout.split()])
    assert outs[0] == pytest.approx(outs[1], abs=1e-12)
