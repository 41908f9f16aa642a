import numpy as np
import pytest

from cranpower.netmodel import NetworkConfig


@pytest.fixture
def table1_config():
    """The default 8-RRH / 4-user cell with the standard constants."""
    return NetworkConfig()


@pytest.fixture
def tiny_config():
    """2 RRHs, 1 user; fast enough for exhaustive checks."""
    return NetworkConfig(num_rrhs=2, num_users=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
