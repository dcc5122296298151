import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from moraslice.model import NetworkState

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def instances(draw, max_users=6, max_stations=3, max_operators=3, zero_prob=0.25):
    """Small feasible instances: every user has some coverage, every operator a user."""
    n_u = draw(st.integers(1, max_users))
    n_b = draw(st.integers(1, max_stations))
    n_o = draw(st.integers(1, min(max_operators, n_u)))
    raw = draw(st.lists(st.floats(0.1, 1.0), min_size=n_o, max_size=n_o))
    shares = np.array(raw) / sum(raw)
    ops = list(range(n_o)) + draw(st.lists(st.integers(0, n_o - 1),
                                          min_size=n_u - n_o, max_size=n_u - n_o))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    rates = rng.uniform(0.5, 20.0, (n_u, n_b)) * (rng.random((n_u, n_b)) >= zero_prob)
    for u in range(n_u):
        if not np.any(rates[u] > 0):
            rates[u, rng.integers(n_b)] = rng.uniform(0.5, 20.0)
    return NetworkState.build(shares.tolist(), ops, rates)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report ------------------------------------------------------

ACCEPTANCE = {}


def record(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
