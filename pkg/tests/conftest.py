import numpy as np
import pytest

from neuroarm.config import SimConfig
from neuroarm.sim import default_classifier


@pytest.fixture(scope="session")
def config():
    return SimConfig()


@pytest.fixture(scope="session")
def classifier(config):
    return default_classifier(config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
