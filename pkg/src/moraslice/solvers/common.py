from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from moraslice import kernels
from moraslice.model import Allocation, Association, NetworkState

# W-step moves must beat float noise to count as improvements.
UTILITY_TOL = 1e-12


@dataclass(frozen=True)
class SolverParams:
    m: int = 3
    max_iterations: int | None = None
    hysteresis: float = 0.0
    tie_break: str = "lowest-id"

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.hysteresis < 0:
            raise ValueError("hysteresis must be >= 0")
        if self.tie_break != "lowest-id":
            raise ValueError("only the lowest-id tie-break is supported")

    def move_cap(self, n_users: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return max(1, 100 * n_users)


@dataclass(frozen=True, eq=False)
class SolverReport:
    final_association: Association
    final_allocation: Allocation
    utility_trace: tuple
    reassociation_count: int
    converged: bool
    iterations: int
    gain_trace: tuple = ()
    moves: tuple = ()
    state: NetworkState | None = None

    def __post_init__(self):
        assert len(self.utility_trace) == self.iterations + 1
        assert self.reassociation_count <= self.iterations

    @property
    def utility(self) -> float:
        return self.utility_trace[-1]


class WorkingCopy:
    """Mutable association owned by one solver run.

    Slots with ``x < 0`` are unassociated and carry no load.
    """

    def __init__(self, rates, weights, x, n_stations=None):
        self.rates = np.ascontiguousarray(rates, dtype=float)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        self.x = np.array(x, dtype=np.int64)
        self.n_stations = self.rates.shape[1] if n_stations is None else n_stations
        self.refresh_loads()
        self.trace: list[float] = []
        self.moves: list[tuple[int, int, int]] = []

    def refresh_loads(self):
        act = self.x >= 0
        self.loads = np.bincount(self.x[act], weights=self.weights[act],
                                 minlength=self.n_stations).astype(float)

    def utility(self) -> float:
        return float(kernels.utility(self.rates, self.weights, self.x, self.n_stations))

    def start_trace(self):
        self.trace = [self.utility()]
        self.moves = []

    def place(self, u: int, b: int):
        self.x[u] = b
        self.loads[b] += self.weights[u]

    def move(self, u: int, q: int):
        a = int(self.x[u])
        w = self.weights[u]
        self.loads[a] -= w
        self.loads[q] += w
        self.x[u] = q
        self.moves.append((int(u), a, int(q)))
        self.trace.append(self.utility())

    def rate(self, u: int) -> float:
        b = self.x[u]
        return self.weights[u] * self.rates[u, b] / self.loads[b]

    def join_target(self, u: int) -> int:
        """Station maximising ``w c / (l + w)`` for an unassociated user."""
        w = self.weights[u]
        c = self.rates[u]
        val = np.where(c > 0, (w * c) / (self.loads + w), -1.0)
        b = int(np.argmax(val))
        if val[b] < 0:
            return -1
        return b

    def station_mask(self, *stations) -> np.ndarray:
        mask = np.zeros(self.n_stations, dtype=bool)
        for s in stations:
            mask[s] = True
        return mask


def mora_fractions(weights, x, n_stations) -> np.ndarray:
    f = np.zeros((x.shape[0], n_stations))
    act = x >= 0
    loads = np.bincount(x[act], weights=weights[act], minlength=n_stations)
    rows = np.flatnonzero(act)
    f[rows, x[rows]] = weights[rows] / loads[x[rows]]
    return f


def report(state: NetworkState, work: WorkingCopy, *, reassociations: int,
           converged: bool, gains=(), out_state: NetworkState | None = None) -> SolverReport:
    st = state if out_state is None else out_state
    x = Association(work.x)
    f = Allocation(mora_fractions(st.weights, work.x, st.n_stations))
    return SolverReport(
        final_association=x,
        final_allocation=f,
        utility_trace=tuple(float(v) for v in work.trace),
        reassociation_count=reassociations,
        converged=converged,
        iterations=len(work.trace) - 1,
        gain_trace=tuple(float(g) for g in gains),
        moves=tuple(work.moves),
        state=st,
    )
