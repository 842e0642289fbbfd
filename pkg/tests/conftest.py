import numpy as np
import pytest

from backend.src.market import GeneratorParams, Market, RewardModel, generate_market
from backend.src.named_markets import named_example


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ucb3x3():
    return named_example('ucb3x3', 'point')


@pytest.fixture
def drrs4():
    return named_example('drrs4', 'point')


@pytest.fixture
def k3():
    return named_example('k3', 'point')


def random_market(seed, n, m, min_gap=0.0, kind='bernoulli'):
    return generate_market(GeneratorParams(n, m, min_gap, kind), np.random.default_rng(seed))


def point_market(agent_means, firm_means):
    return Market(np.asarray(agent_means, dtype=float), np.asarray(firm_means, dtype=float), RewardModel('point'))
