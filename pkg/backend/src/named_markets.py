"""Small hand-built markets given as ordinal preference tables (1-based)."""
import numpy as np

from .config import SimulationConfig as cfg
from .errors import ConfigError
from .market import Market, RewardModel

EXAMPLES = {
    'introstrategic': {
        'description': 'Unique stable matching that an uncertain firm can only reach by rejecting',
        'agents': [[1, 2], [1, 2]],
        'firms': [[1, 2], [2, 1]],
    },
    'coordfgs': {
        'description': 'Alpha-reducible 3x3 market with identical firm lists',
        'agents': [[1, 2, 3], [2, 1, 3], [1, 3, 2]],
        'firms': [[1, 2, 3], [1, 2, 3], [1, 2, 3]],
    },
    'ucb3x3': {
        'description': '3x3 market where one misordered agent list changes the platform matching',
        'agents': [[1, 2, 3], [2, 1, 3], [3, 1, 2]],
        'firms': [[2, 3, 1], [1, 2, 3], [3, 1, 2]],
    },
    'drrs4': {
        'description': '3x3 market with two stable matchings',
        'agents': [[1, 2, 3], [2, 3, 1], [3, 2, 1]],
        'firms': [[2, 3, 1], [3, 1, 2], [1, 2, 3]],
    },
    'k3': {
        'description': '2x2 market with an application cycle under hiring-change feedback',
        'agents': [[1, 2], [2, 1]],
        'firms': [[2, 1], [1, 2]],
    },
    'multappl': {
        'description': '2x2 market for set applications with agent-side priority',
        'agents': [[1, 2], [2, 1]],
        'firms': [[2, 1], [1, 2]],
    },
}


def _grid_means(tables, width):
    levels = np.linspace(cfg.EXAMPLE_TOP_MEAN, cfg.EXAMPLE_BOTTOM_MEAN, width)
    means = np.empty((len(tables), width))
    for owner, order in enumerate(tables):
        for position, peer in enumerate(order):
            means[owner, peer - 1] = levels[position]
    return means


def named_example(name, reward_kind=cfg.DEFAULT_REWARD_KIND, sigma=cfg.DEFAULT_SIGMA):
    """Market whose ground-truth lists equal the named table; means on an even grid."""
    if name not in EXAMPLES:
        raise ConfigError('market.example', f"unknown example '{name}'; known: {', '.join(sorted(EXAMPLES))}")
    table = EXAMPLES[name]
    n, m = len(table['agents']), len(table['firms'])
    return Market(_grid_means(table['agents'], m), _grid_means(table['firms'], n), RewardModel(reward_kind, sigma))


def example_names():
    return sorted(EXAMPLES)
