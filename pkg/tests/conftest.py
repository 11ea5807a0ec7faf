import numpy as np
import pytest

from signalvuln.fixtures import build_example_network, build_grid_network


@pytest.fixture(scope="session")
def example():
    return build_example_network()


@pytest.fixture(scope="session")
def grid():
    return build_grid_network(3, 5, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
