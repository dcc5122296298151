from moraslice.solvers.common import SolverParams, SolverReport, WorkingCopy
from moraslice.solvers.exact import brute_force_mora, search_space
from moraslice.solvers.fixtures import (
    build_3dm_instance,
    has_3dm_matching,
    matching_utility,
    online_worst_case_fixture,
    random_3dm_family,
    replay_online,
)
from moraslice.solvers.gllg import gllg_join, gllg_leave, gllg_move
from moraslice.solvers.greedy import (
    distributed_greedy,
    greedy_largest_gain,
    is_equilibrium,
    sinr_association,
)

__all__ = [
    "SolverParams", "SolverReport", "WorkingCopy",
    "brute_force_mora", "search_space",
    "build_3dm_instance", "has_3dm_matching", "matching_utility",
    "online_worst_case_fixture", "random_3dm_family", "replay_online",
    "gllg_join", "gllg_leave", "gllg_move",
    "distributed_greedy", "greedy_largest_gain", "is_equilibrium", "sinr_association",
]
