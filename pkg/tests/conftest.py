import numpy as np
import pytest

from varq.spaces import INF, Space


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SPACES = [Space.lr(2, 1.0), Space.lr(3, 2.0), Space.lr(4, INF), Space.lr(3, 3.5)]


def random_values(rng, space, count, scale=1.0):
    return rng.normal(scale=scale, size=(count, space.dim))
