import json

import numpy as np
import pytest

from moraslice import verify


def test_suites_pass():
    for suite in ("theorems", "oracle"):
        n, violations = verify.run_suite(suite, 30, seed=2)
        assert n > 0 and violations == []


def test_injected_fault_is_caught():
    n, violations = verify.run_suite("theorems", 5, seed=2, inject_fault=True)
    assert violations and violations[0].check == "allocations_valid"


def test_instance_round_trip():
    s = verify.random_instance(np.random.default_rng(8))
    d = json.loads(json.dumps(verify.instance_to_dict(s)))
    t = verify.instance_from_dict(d)
    assert np.array_equal(s.rates, t.rates)
    assert np.array_equal(s.weights, t.weights)


def test_random_instances_are_feasible():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = verify.random_instance(rng, max_users=10, max_stations=4)
        s.check_coverage()
        assert not s.idle_operators


def test_bad_arguments():
    with pytest.raises(ValueError):
        verify.run_suite("everything", 3, 1)
    with pytest.raises(ValueError):
        verify.run_suite("all", 0, 1)
