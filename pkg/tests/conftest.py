import math

import numpy as np
import pytest
from hypothesis import settings

from convexlp.sphere import build_grid

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid16():
    return build_grid(3, 16)


@pytest.fixture(scope="session")
def grid24():
    return build_grid(3, 24)


@pytest.fixture(scope="session")
def circle64():
    return build_grid(2, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


SQRT_4PI = math.sqrt(4 * math.pi)
