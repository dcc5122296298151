import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from moraslice.allocation import mora_allocation
from moraslice.model import (
    Allocation,
    Association,
    InfeasibleAllocation,
    InstanceError,
    NetworkState,
    compute_weights,
    make_state,
    network_utility,
    operator_utilities,
    operator_utility,
    user_rate,
)
from moraslice.verify import random_association

from conftest import instances


def test_user_rate_full_allocation():
    s = make_state([[10e6]])
    x = Association([0])
    assert user_rate(s, x, Allocation([[1.0]]), 0) == 10e6


def test_user_rate_half_allocation():
    s = make_state([[8e6, 1.0]])
    assert user_rate(s, Association([0]), Allocation([[0.5, 0.0]]), 0) == 4e6


def test_user_rate_matches_termwise_product(rng):
    s = make_state(rng.uniform(1, 5, (4, 3)))
    x = random_association(s, rng)
    f = mora_allocation(s, x)
    for u in range(4):
        b = x.x[u]
        assert user_rate(s, x, f, u) == pytest.approx(f.f[u, b] * s.rates[u, b], rel=1e-15)


@pytest.mark.parametrize("shares, ops, expected", [
    ([1.0], [0, 0, 0, 0], [0.25] * 4),
    ([0.5, 0.5], [0, 1, 1], [0.5, 0.25, 0.25]),
    ([0.6, 0.4], [0, 0, 0, 1, 1], [0.2] * 5),
])
def test_compute_weights(shares, ops, expected):
    s = NetworkState.build(shares, ops, np.ones((len(ops), 1)))
    w = compute_weights(s)
    assert [w[u] for u in range(len(ops))] == pytest.approx(expected, abs=1e-12)


def test_network_utility_single_term():
    s = make_state([[2.0]])
    x = Association([0])
    assert network_utility(s, x, Allocation([[1.0]])) == pytest.approx(math.log(2))


def test_network_utility_zero_for_unit_rates():
    s = make_state([[2.0], [2.0]])
    x = Association([0, 0])
    assert network_utility(s, x, mora_allocation(s, x)) == pytest.approx(0.0, abs=1e-15)


def test_network_utility_termwise(rng):
    s = NetworkState.build([0.3, 0.7], [0, 1, 1, 0, 1, 1], rng.uniform(1, 9, (6, 3)))
    x = random_association(s, rng)
    f = mora_allocation(s, x)
    total = 0.0
    for u in range(6):
        total += s.users[u].weight * math.log(f.f[u, x.x[u]] * s.rates[u, x.x[u]])
    assert network_utility(s, x, f) == pytest.approx(total, abs=1e-12)


def test_operator_utility_of_rate_e():
    s = make_state([[math.e]])
    assert operator_utility(s, Association([0]), Allocation([[1.0]]), 0) == pytest.approx(1.0)


def test_operator_utility_equal_rates():
    s = NetworkState.build([0.5, 0.5], [0, 0, 1], [[6.0, 0], [0, 6.0], [6.0, 6.0]])
    x = Association([0, 1, 1])
    f = Allocation([[0.5, 0], [0, 0.5], [0, 0.5]])
    assert operator_utility(s, x, f, 0) == pytest.approx(math.log(3.0))


@given(instances())
def test_utility_decomposes_over_operators(s):
    x = random_association(s, np.random.default_rng(0))
    f = mora_allocation(s, x)
    per_op = operator_utilities(s, x, f)
    total = sum(o.share * per_op[o.id] for o in s.operators)
    assert network_utility(s, x, f) == pytest.approx(total, abs=1e-12)


@given(instances())
def test_weights_sum_to_one(s):
    assert s.weights.sum() == pytest.approx(1.0, abs=1e-9)
    for o in s.operators:
        assert s.weights[s.operator_members(o.id)].sum() == pytest.approx(o.share, abs=1e-9)


@given(instances(), st.integers(0, 5), st.floats(1.01, 10.0))
def test_scaling_a_rate_raises_utility(s, k, factor):
    x = random_association(s, np.random.default_rng(1))
    f = mora_allocation(s, x)
    u = k % s.n_users
    rates = s.rates.copy()
    rates[u, x.x[u]] *= factor
    s2 = NetworkState.build([o.share for o in s.operators], s.user_op.tolist(), rates)
    assert network_utility(s2, x, f) > network_utility(s, x, f)


def test_idle_operator_holds_no_weight():
    s = NetworkState.build([0.5, 0.5], [0, 0], np.ones((2, 1)))
    assert s.idle_operators == (1,)
    assert s.weights.tolist() == [0.25, 0.25]


@pytest.mark.parametrize("shares, ops, rates", [
    ([0.5, 0.4], [0, 1], np.ones((2, 1))),       # shares do not sum to 1
    ([1.0], [1], np.ones((1, 1))),               # unknown operator
    ([1.0], [0, 0], np.ones((3, 1))),            # shape mismatch
    ([1.0], [0], -np.ones((1, 1))),              # negative rate
])
def test_invalid_instances_rejected(shares, ops, rates):
    with pytest.raises(InstanceError):
        NetworkState.build(shares, ops, rates)


def test_association_must_be_total_and_feasible():
    s = make_state([[1.0, 0.0], [1.0, 1.0]])
    with pytest.raises(InstanceError):
        Association([0]).validate(s)
    with pytest.raises(InstanceError):
        Association([1, 0]).validate(s)


def test_allocation_validation():
    s = make_state([[1.0, 1.0], [1.0, 1.0]])
    x = Association([0, 0])
    with pytest.raises(InstanceError):
        Allocation([[0.7, 0], [0.7, 0]]).validate(s, x)
    with pytest.raises(InstanceError):
        Allocation([[0.5, 0.1], [0.5, 0]]).validate(s, x)
    Allocation([[0.5, 0], [0.5, 0]]).validate(s, x)


def test_zero_rate_is_infeasible_for_utility():
    s = make_state([[1.0], [1.0]])
    x = Association([0, 0])
    with pytest.raises(InfeasibleAllocation):
        network_utility(s, x, Allocation([[1.0], [0.0]]))
