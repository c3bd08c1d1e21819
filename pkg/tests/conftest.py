import numpy as np
import pytest

from pathsem import Dag


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain_dag():
    return Dag(("a", "b", "c"), [("a", "b"), ("b", "c")])


@pytest.fixture
def collider_dag():
    return Dag(("a", "b", "c"), [("a", "c"), ("b", "c")])
