import numpy as np
import pytest

import helpers


@pytest.fixture
def two_node():
    return helpers.two_node_loop()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
