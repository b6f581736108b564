import numpy as np
import pytest

from utilmax.market import binomial_tree, trinomial_tree
from utilmax.utility import ExponentialUtility, ShiftedLogUtility


@pytest.fixture
def binomial():
    # s0=1, up 2.0 / down 0.5 with P(up)=0.75; unique pricing measure (1/3, 2/3)
    return binomial_tree()


@pytest.fixture
def trinomial():
    return trinomial_tree()


@pytest.fixture
def exp_u():
    return ExponentialUtility(1.0)


@pytest.fixture
def log_u():
    return ShiftedLogUtility(-2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
