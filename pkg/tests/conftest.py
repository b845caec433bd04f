import numpy as np
import pytest

from artifact.dist import Marginal, ProductPrior


@pytest.fixture
def coin():
    """{1: 0.5, 2: 0.5}"""
    return Marginal.from_pairs({1.0: 0.5, 2.0: 0.5})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def iid(d, n, m):
    return ProductPrior.iid(d, n, m)
