import numpy as np
import pytest

from helpers import two_task_domain, walled_world


@pytest.fixture
def tiny_domain():
    return two_task_domain()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def wall_world():
    return walled_world()
