import numpy as np
import pytest

from bjspec.model import random_model


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture
def model23(rng):
    return random_model(2, 3, rng)
