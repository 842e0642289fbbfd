"""Ground-truth market representation, reward models and market generators.

Indices are 0-based everywhere inside the package; external formats (CSV, CLI
output) shift them to 1-based.
"""
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import truncnorm

from .config import SimulationConfig as cfg
from .errors import MarketError, ParameterError, PreferenceError

logger = logging.getLogger(__name__)


class Side(str, Enum):
    AGENT = 'agent'
    FIRM = 'firm'


@lru_cache(maxsize=4096)
def _truncnorm_location(mean, sigma):
    """Location of a [0, 1]-truncated normal whose mean equals ``mean``."""
    def gap(loc):
        a, b = (0.0 - loc) / sigma, (1.0 - loc) / sigma
        return truncnorm.mean(a, b, loc=loc, scale=sigma) - mean

    lo, hi = mean - 1.0, mean + 1.0
    for _ in range(50):
        if gap(lo) < 0 < gap(hi):
            break
        lo, hi = lo - (hi - lo), hi + (hi - lo)
    return brentq(gap, lo, hi, xtol=1e-12)


@dataclass(frozen=True)
class RewardModel:
    """Per-pair bounded reward distribution with the pair mean as parameter."""
    kind: str = cfg.DEFAULT_REWARD_KIND
    sigma: float = cfg.DEFAULT_SIGMA

    def __post_init__(self):
        if self.kind not in cfg.REWARD_KINDS:
            raise MarketError(f"unknown reward kind '{self.kind}'; known: {sorted(cfg.REWARD_KINDS)}")
        if self.kind == 'gaussian' and not self.sigma > 0:
            raise MarketError(f"gaussian reward model needs sigma > 0, got {self.sigma}")

    def _degenerate(self, mean):
        return self.kind == 'point' or (self.kind == 'gaussian' and (mean <= 0.0 or mean >= 1.0))

    def sample(self, mean, rng):
        if self.kind == 'bernoulli':
            return 1.0 if rng.random() < mean else 0.0
        if self._degenerate(mean):
            return float(mean)
        loc = _truncnorm_location(float(mean), self.sigma)
        a, b = (0.0 - loc) / self.sigma, (1.0 - loc) / self.sigma
        return float(truncnorm.rvs(a, b, loc=loc, scale=self.sigma, random_state=rng))

    def cdf(self, mean, x):
        """P(X <= x) for a draw with the given mean; x in [0, 1]."""
        if self.kind == 'bernoulli':
            return 1.0 if x >= 1.0 else 1.0 - mean
        if self._degenerate(mean):
            return 1.0 if x >= mean else 0.0
        loc = _truncnorm_location(float(mean), self.sigma)
        a, b = (0.0 - loc) / self.sigma, (1.0 - loc) / self.sigma
        return float(truncnorm.cdf(x, a, b, loc=loc, scale=self.sigma))


@dataclass(frozen=True)
class PrefList:
    """A strict ranking of the opposite side, most preferred first."""
    side: Side
    owner: int
    order: tuple
    ranks: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        order = tuple(int(x) for x in self.order)
        if sorted(order) != list(range(len(order))):
            raise PreferenceError(f"{self.side.value} {self.owner}: order {order} is not a permutation")
        ranks = [0] * len(order)
        for position, peer in enumerate(order):
            ranks[peer] = position
        object.__setattr__(self, 'order', order)
        object.__setattr__(self, 'ranks', tuple(ranks))

    def __len__(self):
        return len(self.order)

    def prefers(self, x, y):
        """True if peer x is ranked strictly above peer y."""
        return self.ranks[x] < self.ranks[y]

    def above(self, peer):
        """Peers ranked strictly above ``peer``."""
        return self.order[:self.ranks[peer]]

    def top(self, k=1):
        return self.order[:k]


@dataclass(frozen=True)
class Matching:
    """One-to-one assignment of agents to firms; ``None`` marks an unmatched agent."""
    agent_match: tuple
    m: int

    def __post_init__(self):
        match = tuple(None if f is None else int(f) for f in self.agent_match)
        taken = [f for f in match if f is not None]
        if any(f < 0 or f >= self.m for f in taken):
            raise MarketError(f"matching {match} refers to a firm outside 0..{self.m - 1}")
        if len(set(taken)) != len(taken):
            raise MarketError(f"matching {match} is not injective")
        object.__setattr__(self, 'agent_match', match)

    @classmethod
    def empty(cls, n, m):
        return cls((None,) * n, m)

    @classmethod
    def from_pairs(cls, pairs, n, m):
        match = [None] * n
        for a, f in pairs:
            match[a] = f
        return cls(tuple(match), m)

    @property
    def n(self):
        return len(self.agent_match)

    @cached_property
    def firm_match(self):
        match = [None] * self.m
        for a, f in enumerate(self.agent_match):
            if f is not None:
                match[f] = a
        return tuple(match)

    def is_perfect(self):
        """Every agent is matched (the agent side is the short side)."""
        return all(f is not None for f in self.agent_match)

    def pairs(self):
        return tuple((a, f) for a, f in enumerate(self.agent_match) if f is not None)


def _strict_order(row, side, owner):
    row = np.asarray(row, dtype=float)
    order = np.argsort(-row, kind='stable')
    ordered = row[order]
    if len(ordered) > 1 and np.any(ordered[:-1] == ordered[1:]):
        raise MarketError(f"distinctness violation: {side.value} {owner} has duplicate means {row.tolist()}")
    return PrefList(side, owner, tuple(int(x) for x in order))


def prefs_from_means(matrix, side):
    """Preference lists sorting each row's peers by strictly decreasing mean."""
    return [_strict_order(row, side, owner) for owner, row in enumerate(np.asarray(matrix, dtype=float))]


@dataclass(frozen=True, eq=False)
class Market:
    """Ground truth: agent_means is n x m (u_{a,f}), firm_means is m x n (u_{f,a})."""
    agent_means: np.ndarray
    firm_means: np.ndarray
    reward_model: RewardModel = field(default_factory=RewardModel)

    def __post_init__(self):
        agent = np.array(self.agent_means, dtype=float)
        firm = np.array(self.firm_means, dtype=float)
        if agent.ndim != 2 or firm.ndim != 2:
            raise MarketError("agent_means and firm_means must be 2-D")
        n, m = agent.shape
        if n < 1 or m < n:
            raise MarketError(f"need 1 <= n <= m, got n={n}, m={m}")
        if firm.shape != (m, n):
            raise MarketError(f"firm_means has shape {firm.shape}, expected {(m, n)}")
        for name, matrix in (('agent_means', agent), ('firm_means', firm)):
            if not np.all(np.isfinite(matrix)) or matrix.min() < 0.0 or matrix.max() > 1.0:
                raise MarketError(f"{name} must lie in [0, 1]")
        prefs_from_means(agent, Side.AGENT)
        prefs_from_means(firm, Side.FIRM)
        agent.setflags(write=False)
        firm.setflags(write=False)
        object.__setattr__(self, 'agent_means', agent)
        object.__setattr__(self, 'firm_means', firm)

    @property
    def n(self):
        return self.agent_means.shape[0]

    @property
    def m(self):
        return self.agent_means.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Market):
            return NotImplemented
        return (self.reward_model == other.reward_model
                and np.array_equal(self.agent_means, other.agent_means)
                and np.array_equal(self.firm_means, other.firm_means))

    __hash__ = None

    def mean(self, side, owner, peer):
        if side is Side.AGENT:
            return float(self.agent_means[owner, peer])
        return float(self.firm_means[owner, peer])

    def sample(self, side, owner, peer, rng):
        return self.reward_model.sample(self.mean(side, owner, peer), rng)

    def to_dict(self):
        data = {
            'n': self.n,
            'm': self.m,
            'agent_means': self.agent_means.tolist(),
            'firm_means': self.firm_means.tolist(),
            'reward_kind': self.reward_model.kind,
        }
        if self.reward_model.kind == 'gaussian':
            data['sigma'] = self.reward_model.sigma
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            n, m = int(data['n']), int(data['m'])
            agent = np.asarray(data['agent_means'], dtype=float).reshape(n, m)
            firm = np.asarray(data['firm_means'], dtype=float).reshape(m, n)
        except KeyError as e:
            raise MarketError(f"market document is missing field {e}") from e
        except (TypeError, ValueError) as e:
            raise MarketError(f"market document has malformed means: {e}") from e
        model = RewardModel(data.get('reward_kind', cfg.DEFAULT_REWARD_KIND),
                            float(data.get('sigma', cfg.DEFAULT_SIGMA)))
        return cls(agent, firm, model)


def ground_truth_prefs(market):
    """(agent PrefLists, firm PrefLists) sorted by decreasing ground-truth mean."""
    return prefs_from_means(market.agent_means, Side.AGENT), prefs_from_means(market.firm_means, Side.FIRM)


def sample_reward(market, side, pair, rng):
    """One draw for ``pair`` = (owner, peer) on ``side``; always in [0, 1]."""
    owner, peer = pair
    return market.sample(side, owner, peer, rng)


def load_market(path):
    with open(path, 'r') as f:
        return Market.from_dict(json.load(f))


def dump_market(market, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(market.to_dict(), f, indent=2)
    return path


@dataclass(frozen=True)
class GeneratorParams:
    n: int
    m: int
    min_gap: float = cfg.DEFAULT_MIN_GAP
    reward_kind: str = cfg.DEFAULT_REWARD_KIND
    sigma: float = cfg.DEFAULT_SIGMA

    def validate(self):
        if self.n < 1 or self.m < self.n:
            raise ParameterError(f"need 1 <= n <= m, got n={self.n}, m={self.m}")
        if self.min_gap < 0:
            raise ParameterError(f"min_gap must be non-negative, got {self.min_gap}")
        if self.min_gap * max(self.n, self.m) >= 1.0:
            raise ParameterError(
                f"min_gap={self.min_gap} cannot separate {max(self.n, self.m)} levels inside [0, 1]")
        return self


def _jittered_levels(length, min_gap, rng):
    """``length`` increasing levels in [0, 1] with consecutive spacing >= min_gap."""
    slack = 1.0 - min_gap * (length - 1)
    weights = rng.dirichlet(np.ones(length + 1)) * slack
    levels = weights[0] + min_gap * np.arange(length) + np.concatenate(([0.0], np.cumsum(weights[1:length])))
    return np.clip(levels, 0.0, 1.0)


def generate_market(params, rng):
    """Random market whose rows are separated by at least ``params.min_gap``."""
    params.validate()
    agent = np.array([rng.permutation(_jittered_levels(params.m, params.min_gap, rng)) for _ in range(params.n)])
    firm = np.array([rng.permutation(_jittered_levels(params.n, params.min_gap, rng)) for _ in range(params.m)])
    return Market(agent, firm, RewardModel(params.reward_kind, params.sigma))


def generate_alpha_reducible(params, rng):
    """Random market whose fixed-pair sequence is (a_i, f_i) for i = 0..n-1."""
    params.validate()
    n, m = params.n, params.m
    agent = np.empty((n, m))
    for a in range(n):
        row = rng.permutation(_jittered_levels(m, params.min_gap, rng))
        # f_a must top a among firms a..m-1
        best = a + int(np.argmax(row[a:]))
        row[a], row[best] = row[best], row[a]
        agent[a] = row
    firm = np.empty((m, n))
    for f in range(m):
        row = rng.permutation(_jittered_levels(n, params.min_gap, rng))
        if f < n:
            best = f + int(np.argmax(row[f:]))
            row[f], row[best] = row[best], row[f]
        firm[f] = row
    logger.debug("generated alpha-reducible market n=%d m=%d gap=%.3f", n, m, params.min_gap)
    return Market(agent, firm, RewardModel(params.reward_kind, params.sigma))


def minimum_gap(market):
    """Smallest within-row separation over both sides."""
    gaps = []
    for matrix in (market.agent_means, market.firm_means):
        if matrix.shape[1] > 1:
            gaps.append(np.diff(np.sort(matrix, axis=1), axis=1).min())
    return float(min(gaps)) if gaps else float('inf')
