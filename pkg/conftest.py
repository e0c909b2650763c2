"""Shared fixtures for the NMPC test suite."""

import numpy as np
import pytest

from dynamics import make_linear_scalar, make_syncgen
from ocp import riccati_stationary, riccati_value


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run closed-loop synchronous generator scenarios")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def lq():
    """x+ = 2x + u, l = x^2 + u^2."""
    return make_linear_scalar(2.0, 1.0, 1.0, 1.0)


@pytest.fixture
def lq_oracle():
    """V_N(x) and V_inf(x) of the lq fixture from the Riccati recursion."""
    class Oracle:
        @staticmethod
        def value(N, x):
            return riccati_value(2.0, 1.0, 1.0, 1.0, N) * x * x

        @staticmethod
        def infinite(x):
            return riccati_stationary(2.0, 1.0, 1.0, 1.0) * x * x

    return Oracle


@pytest.fixture(scope="session")
def syncgen():
    return make_syncgen()


@pytest.fixture
def syncgen_x0():
    return np.array([1.02, 0.1, 1.014])


@pytest.fixture
def rng():
    return np.random.default_rng(20100715)
