"""Weighted proportional-fair slicing of shared radio access networks."""

from moraslice.allocation import mora_allocation, ss_allocation, ss_optimize
from moraslice.model import (
    Allocation,
    Association,
    InfeasibleAllocation,
    InstanceError,
    NetworkState,
    Operator,
    RateMatrix,
    SizeGuardError,
    User,
    compute_weights,
    network_utility,
    operator_utility,
    user_rate,
)

__version__ = "0.1.0"
