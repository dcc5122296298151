"""Hot loops of the association solvers.

Every kernel exists twice: a numba version (``*_nb``) written as explicit
loops and a numpy version (``*_np``) written with array operations. The
module-level names dispatch to one of them according to ``_accel.USE_NUMBA``.

Conventions shared by all kernels:

* ``rates`` is a float64 ``(U, B)`` array of full-station rates.
* ``weights`` is float64 ``(U,)``; slots with ``x[u] < 0`` are ignored.
* ``x`` is int64 ``(U,)`` holding the station index of each user.
* ``loads[b]`` is the sum of the weights associated with ``b``.
* Under weighted proportional-fair sharing a user at ``b`` receives
  ``w * c / loads[b]``; moving to ``q`` would yield ``w * c / (loads[q] + w)``.
* Ties go to the lowest user index, then the lowest station index.
"""

import numpy as np

from moraslice._accel import njit, pick

NO_MOVE = -1
# relative slack on rate ratios so float noise in accumulated loads is no gain
RATE_TOL = 1e-12


# ---------------------------------------------------------------------------
# network utility under the proportional-fair allocation
# ---------------------------------------------------------------------------

@njit
def utility_nb(rates, weights, x, n_stations):
    loads = np.zeros(n_stations)
    total = 0.0
    for u in range(x.shape[0]):
        b = x[u]
        if b < 0:
            continue
        w = weights[u]
        if w <= 0.0:
            continue
        c = rates[u, b]
        if c <= 0.0:
            return -np.inf
        total += w * np.log(w * c)
        loads[b] += w
    for b in range(n_stations):
        lb = loads[b]
        if lb > 0.0:
            total -= lb * np.log(lb)
    return total


def utility_np(rates, weights, x, n_stations):
    idx = np.flatnonzero((x >= 0) & (weights > 0))
    if idx.size == 0:
        return 0.0
    w = weights[idx]
    st = x[idx]
    c = rates[idx, st]
    if np.any(c <= 0.0):
        return -np.inf
    loads = np.bincount(st, weights=w, minlength=n_stations)
    busy = loads[loads > 0]
    return float(np.sum(w * np.log(w * c)) - np.sum(busy * np.log(busy)))


# ---------------------------------------------------------------------------
# best rate-gain move among users of candidate stations
# ---------------------------------------------------------------------------

@njit
def best_rate_move_nb(rates, weights, x, loads, cand):
    """Largest ``r_new / r_old`` over users whose station is flagged in ``cand``."""
    n_st = loads.shape[0]
    best_u = NO_MOVE
    best_q = NO_MOVE
    best_ratio = -1.0
    for u in range(x.shape[0]):
        a = x[u]
        if a < 0 or not cand[a]:
            continue
        w = weights[u]
        cur = (w * rates[u, a]) / loads[a]
        for q in range(n_st):
            if q == a:
                continue
            c = rates[u, q]
            if c <= 0.0:
                continue
            new = (w * c) / (loads[q] + w)
            if cur > 0.0:
                ratio = new / cur
            else:
                ratio = np.inf
            if ratio > best_ratio:
                best_ratio = ratio
                best_u = u
                best_q = q
    return best_u, best_q, best_ratio


def best_rate_move_np(rates, weights, x, loads, cand):
    act = x >= 0
    users = np.flatnonzero(act & cand[np.where(act, x, 0)])
    if users.size == 0:
        return NO_MOVE, NO_MOVE, -1.0
    a = x[users]
    w = weights[users][:, None]
    c = rates[users]
    cur = (weights[users] * rates[users, a]) / loads[a]
    with np.errstate(divide="ignore", invalid="ignore"):
        new = (w * c) / (loads[None, :] + w)
        ratio = np.where(cur[:, None] > 0.0, new / cur[:, None], np.inf)
    ratio[c <= 0.0] = -np.inf
    ratio[np.arange(users.size), a] = -np.inf
    flat = int(np.argmax(ratio))
    i, q = divmod(flat, ratio.shape[1])
    r = ratio[i, q]
    if not r > -1.0:
        return NO_MOVE, NO_MOVE, -1.0
    return int(users[i]), int(q), float(r)


# ---------------------------------------------------------------------------
# best utility-improving move among users of candidate stations
# ---------------------------------------------------------------------------

@njit
def _xlogx(v):
    if v <= 0.0:
        return 0.0
    return v * np.log(v)


@njit
def best_utility_move_nb(rates, weights, x, loads, cand):
    """Largest network-utility change ``W_{u,q} - W`` over flagged users."""
    n_st = loads.shape[0]
    best_u = NO_MOVE
    best_q = NO_MOVE
    best_dw = -np.inf
    for u in range(x.shape[0]):
        a = x[u]
        if a < 0 or not cand[a]:
            continue
        w = weights[u]
        ca = rates[u, a]
        la = loads[a]
        leave = _xlogx(la - w) - _xlogx(la)
        for q in range(n_st):
            if q == a:
                continue
            c = rates[u, q]
            if c <= 0.0:
                continue
            lq = loads[q]
            dw = w * (np.log(c) - np.log(ca)) - (leave + _xlogx(lq + w) - _xlogx(lq))
            if dw > best_dw:
                best_dw = dw
                best_u = u
                best_q = q
    return best_u, best_q, best_dw


def _xlogx_np(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    pos = v > 0.0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def best_utility_move_np(rates, weights, x, loads, cand):
    act = x >= 0
    users = np.flatnonzero(act & cand[np.where(act, x, 0)])
    if users.size == 0:
        return NO_MOVE, NO_MOVE, -np.inf
    a = x[users]
    w = weights[users]
    c = rates[users]
    ca = rates[users, a]
    leave = _xlogx_np(loads[a] - w) - _xlogx_np(loads[a])
    join = _xlogx_np(loads[None, :] + w[:, None]) - _xlogx_np(loads)[None, :]
    with np.errstate(divide="ignore"):
        dw = w[:, None] * (np.log(c) - np.log(ca)[:, None]) - (leave[:, None] + join)
    dw[c <= 0.0] = -np.inf
    dw[np.arange(users.size), a] = -np.inf
    flat = int(np.argmax(dw))
    i, q = divmod(flat, dw.shape[1])
    if not np.isfinite(dw[i, q]):
        return NO_MOVE, NO_MOVE, -np.inf
    return int(users[i]), int(q), float(dw[i, q])


# ---------------------------------------------------------------------------
# best-response dynamics
# ---------------------------------------------------------------------------

@njit
def _best_alt_nb(rates, weights, loads, u, a):
    w = weights[u]
    best_q = NO_MOVE
    best_new = -1.0
    for q in range(loads.shape[0]):
        if q == a:
            continue
        c = rates[u, q]
        if c <= 0.0:
            continue
        new = (w * c) / (loads[q] + w)
        if new > best_new:
            best_new = new
            best_q = q
    cur = (w * rates[u, a]) / loads[a]
    if best_q == NO_MOVE:
        return NO_MOVE, 0.0
    if cur > 0.0:
        return best_q, best_new / cur
    return best_q, np.inf


@njit
def distributed_greedy_nb(rates, weights, x, loads, eps, max_moves):
    """Sweep users in index order, each moving to her best station.

    Mutates ``x`` and ``loads``. Returns ``(trace, moves, converged)`` with
    ``trace[:moves + 1]`` the utility before and after every move.
    """
    n_st = loads.shape[0]
    trace = np.empty(max_moves + 1)
    trace[0] = utility_nb(rates, weights, x, n_st)
    moves = 0
    while True:
        moved = False
        for u in range(x.shape[0]):
            a = x[u]
            if a < 0:
                continue
            q, ratio = _best_alt_nb(rates, weights, loads, u, a)
            if q == NO_MOVE or not ratio > 1.0 + eps + RATE_TOL:
                continue
            if moves == max_moves:
                return trace, moves, False
            w = weights[u]
            loads[a] -= w
            loads[q] += w
            x[u] = q
            moves += 1
            trace[moves] = utility_nb(rates, weights, x, n_st)
            moved = True
        if not moved:
            return trace, moves, True


def _best_alt_np(rates, weights, loads, u, a):
    w = weights[u]
    c = rates[u]
    new = (w * c) / (loads + w)
    new[a] = -1.0
    new[c <= 0.0] = -1.0
    q = int(np.argmax(new))
    if new[q] < 0.0:
        return NO_MOVE, 0.0
    cur = (w * rates[u, a]) / loads[a]
    return q, (new[q] / cur if cur > 0.0 else np.inf)


def distributed_greedy_np(rates, weights, x, loads, eps, max_moves):
    n_st = loads.shape[0]
    trace = np.empty(max_moves + 1)
    trace[0] = utility_np(rates, weights, x, n_st)
    moves = 0
    active = np.flatnonzero(x >= 0)
    while True:
        moved = False
        for u in active:
            a = x[u]
            q, ratio = _best_alt_np(rates, weights, loads, u, a)
            if q == NO_MOVE or not ratio > 1.0 + eps + RATE_TOL:
                continue
            if moves == max_moves:
                return trace, moves, False
            w = weights[u]
            loads[a] -= w
            loads[q] += w
            x[u] = q
            moves += 1
            trace[moves] = utility_np(rates, weights, x, n_st)
            moved = True
        if not moved:
            return trace, moves, True


@njit
def greedy_largest_gain_nb(rates, weights, x, loads, eps, max_moves):
    """Move the single user with the globally largest gain ratio, repeatedly.

    Returns ``(trace, gains, moves, converged)``; ``gains[i]`` is the ratio
    of the move that produced ``trace[i + 1]``.
    """
    n_st = loads.shape[0]
    cand = np.ones(n_st, dtype=np.bool_)
    trace = np.empty(max_moves + 1)
    gains = np.empty(max_moves)
    trace[0] = utility_nb(rates, weights, x, n_st)
    moves = 0
    while True:
        u, q, ratio = best_rate_move_nb(rates, weights, x, loads, cand)
        if u == NO_MOVE or not ratio > 1.0 + eps + RATE_TOL:
            return trace, gains, moves, True
        if moves == max_moves:
            return trace, gains, moves, False
        a = x[u]
        w = weights[u]
        loads[a] -= w
        loads[q] += w
        x[u] = q
        gains[moves] = ratio
        moves += 1
        trace[moves] = utility_nb(rates, weights, x, n_st)


def greedy_largest_gain_np(rates, weights, x, loads, eps, max_moves):
    n_st = loads.shape[0]
    cand = np.ones(n_st, dtype=bool)
    trace = np.empty(max_moves + 1)
    gains = np.empty(max_moves)
    trace[0] = utility_np(rates, weights, x, n_st)
    moves = 0
    while True:
        u, q, ratio = best_rate_move_np(rates, weights, x, loads, cand)
        if u == NO_MOVE or not ratio > 1.0 + eps + RATE_TOL:
            return trace, gains, moves, True
        if moves == max_moves:
            return trace, gains, moves, False
        a = x[u]
        w = weights[u]
        loads[a] -= w
        loads[q] += w
        x[u] = q
        gains[moves] = ratio
        moves += 1
        trace[moves] = utility_np(rates, weights, x, n_st)


# ---------------------------------------------------------------------------
# exhaustive search
# ---------------------------------------------------------------------------

@njit
def _odometer_value(terms, weights, options, digits, n_st):
    loads = np.zeros(n_st)
    total = 0.0
    for u in range(digits.shape[0]):
        b = options[u, digits[u]]
        total += terms[u, b]
        loads[b] += weights[u]
    for b in range(n_st):
        if loads[b] > 0.0:
            total -= loads[b] * np.log(loads[b])
    return total


@njit
def _advance(digits, n_opts):
    # last user varies fastest -> lexicographic order of option indices
    u = digits.shape[0] - 1
    while u >= 0:
        digits[u] += 1
        if digits[u] < n_opts[u]:
            return True
        digits[u] = 0
        u -= 1
    return False


@njit
def brute_force_nb(terms, weights, options, n_opts, n_st, tol):
    """Lexicographically first assignment within ``tol`` of the maximum.

    ``terms[u, b] = w_u log(w_u c_ub)``; ``options[u, :n_opts[u]]`` lists the
    feasible stations of ``u`` in increasing order.
    """
    n_u = n_opts.shape[0]
    digits = np.zeros(n_u, dtype=np.int64)
    best = -np.inf
    while True:
        v = _odometer_value(terms, weights, options, digits, n_st)
        if v > best:
            best = v
        if not _advance(digits, n_opts):
            break
    digits[:] = 0
    while True:
        v = _odometer_value(terms, weights, options, digits, n_st)
        if v >= best - tol:
            break
        _advance(digits, n_opts)
    x = np.empty(n_u, dtype=np.int64)
    for u in range(n_u):
        x[u] = options[u, digits[u]]
    return x, best


def _decode_chunk(start, stop, n_opts):
    idx = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((idx.size, n_opts.size), dtype=np.int64)
    for u in range(n_opts.size - 1, -1, -1):
        digits[:, u] = idx % n_opts[u]
        idx //= n_opts[u]
    return digits


def _chunk_values(terms, weights, options, n_opts, n_st, start, stop):
    digits = _decode_chunk(start, stop, n_opts)
    k = digits.shape[0]
    rows = np.arange(k)
    total = np.zeros(k)
    loads = np.zeros((k, n_st))
    for u in range(n_opts.size):
        st = options[u, digits[:, u]]
        total += terms[u, st]
        loads[rows, st] += weights[u]
    return total - _xlogx_np(loads).sum(axis=1), digits


def brute_force_np(terms, weights, options, n_opts, n_st, tol, chunk=1 << 16):
    n_total = int(np.prod(n_opts))
    best = -np.inf
    for start in range(0, n_total, chunk):
        vals, _ = _chunk_values(terms, weights, options, n_opts, n_st,
                                start, min(start + chunk, n_total))
        best = max(best, float(vals.max()))
    for start in range(0, n_total, chunk):
        vals, digits = _chunk_values(terms, weights, options, n_opts, n_st,
                                     start, min(start + chunk, n_total))
        hit = np.flatnonzero(vals >= best - tol)
        if hit.size:
            d = digits[hit[0]]
            return options[np.arange(n_opts.size), d].astype(np.int64), best
    raise AssertionError("maximum not revisited")  # pragma: no cover


utility = pick(utility_nb, utility_np)
best_rate_move = pick(best_rate_move_nb, best_rate_move_np)
best_utility_move = pick(best_utility_move_nb, best_utility_move_np)
distributed_greedy = pick(distributed_greedy_nb, distributed_greedy_np)
greedy_largest_gain = pick(greedy_largest_gain_nb, greedy_largest_gain_np)
brute_force = pick(brute_force_nb, brute_force_np)
