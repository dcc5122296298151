"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py --users 400 --stations 21 --repeats 20

Both implementations run on identical inputs; the script checks they agree
before reporting the best-of-N wall time of each.
"""

import argparse
import time

import numpy as np

from moraslice import kernels


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def make_inputs(n_users, n_stations, seed):
    rng = np.random.default_rng(seed)
    rates = rng.uniform(1e6, 5e7, (n_users, n_stations))
    rates[rng.random(rates.shape) < 0.3] = 0.0
    rates[np.arange(n_users), rng.integers(n_stations, size=n_users)] = 1e7
    weights = np.full(n_users, 1.0 / n_users)
    x = np.array([rng.choice(np.flatnonzero(r > 0)) for r in rates], dtype=np.int64)
    loads = np.bincount(x, weights=weights, minlength=n_stations)
    return rates, weights, x, loads


def cases(rates, weights, x, loads):
    n_st = rates.shape[1]
    cand = np.ones(n_st, dtype=bool)
    cap = 100 * rates.shape[0]
    return {
        "utility": lambda impl: impl(rates, weights, x, n_st),
        "best_rate_move": lambda impl: impl(rates, weights, x, loads, cand),
        "best_utility_move": lambda impl: impl(rates, weights, x, loads, cand),
        "distributed_greedy": lambda impl: impl(rates, weights, x.copy(), loads.copy(), 0.0, cap)[1],
        "greedy_largest_gain": lambda impl: impl(rates, weights, x.copy(), loads.copy(), 0.0, cap)[2],
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--users", type=int, nargs="+", default=[100, 400])
    p.add_argument("--stations", type=int, default=21)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args(argv)

    print(f"{'kernel':<22}{'users':>7}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for n in args.users:
        table = cases(*make_inputs(n, args.stations, args.seed))
        for name, call in table.items():
            nb_impl = getattr(kernels, f"{name}_nb")
            np_impl = getattr(kernels, f"{name}_np")
            a, b = call(nb_impl), call(np_impl)  # also warms up the JIT
            if not np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float)):
                raise SystemExit(f"{name}: implementations disagree ({a!r} vs {b!r})")
            t_nb = best_of(lambda: call(nb_impl), args.repeats)
            t_np = best_of(lambda: call(np_impl), args.repeats)
            print(f"{name:<22}{n:>7}{1e3 * t_nb:>12.4f}{1e3 * t_np:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
