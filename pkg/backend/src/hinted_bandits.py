"""Single-agent bandits with hints: AllProbe, Extended AllProbe and empirical-mean AllProbe.

Each round the agent observes a round-robin arm and two probe arms chosen by
rank, then pulls whichever probe returned the larger draw.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .config import SimulationConfig as cfg
from .errors import ParameterError
from .market import Side

logger = logging.getLogger(__name__)


class ArmState:
    """Running mean and population variance per arm (Welford)."""

    def __init__(self, m, epsilon=cfg.EPSILON):
        if epsilon < 0:
            raise ParameterError(f"epsilon must be non-negative, got {epsilon}")
        self.m = m
        self.epsilon = epsilon
        self.counts = np.zeros(m, dtype=np.int64)
        self.mu = np.zeros(m)
        self._m2 = np.zeros(m)

    def record(self, arm, value):
        self.counts[arm] += 1
        delta = value - self.mu[arm]
        self.mu[arm] += delta / self.counts[arm]
        self._m2[arm] += delta * (value - self.mu[arm])

    def variance(self, arm):
        if self.counts[arm] == 0:
            return 0.0
        return max(self._m2[arm] / self.counts[arm], 0.0)

    def ucb_prime(self, arm, epsilon=None):
        """mu + epsilon * variance, or None for an arm never observed."""
        if self.counts[arm] == 0:
            return None
        eps = self.epsilon if epsilon is None else epsilon
        return float(self.mu[arm] + eps * self.variance(arm))

    def ranking(self, epsilon=None):
        """Arms by index value: unobserved first, then descending, then lower index."""
        def key(arm):
            value = self.ucb_prime(arm, epsilon)
            return (0, 0.0, arm) if value is None else (1, -value, arm)
        return sorted(range(self.m), key=key)


def ucb_prime(arms, arm):
    return arms.ucb_prime(arm)


@dataclass(frozen=True)
class HintedStep:
    observed: tuple
    probes: tuple
    pulled: int
    reward: float


def _probe_and_pull(arms, ranked, rank, t, sample, rng):
    m = arms.m
    rr = t % m
    first, second = ranked[rank - 1], ranked[rank]
    observed = (rr, first, second)
    values = []
    for arm in observed:
        value = sample(arm, rng)
        arms.record(arm, value)
        values.append(value)
    x1, x2 = values[1], values[2]
    if x1 > x2:
        pulled = first
    elif x2 > x1:
        pulled = second
    else:
        pulled = min(first, second)
    return HintedStep(observed, (first, second), pulled, max(x1, x2))


def allprobe_step(arms, t, sample, rng):
    return _probe_and_pull(arms, arms.ranking(), 1, t, sample, rng)


def eap_step(arms, i, t, sample, rng):
    """AllProbe targeting the arms ranked i and i+1 (1-based)."""
    if not 1 <= i <= arms.m - 1:
        raise ParameterError(f"target rank must lie in 1..{arms.m - 1}, got {i}")
    return _probe_and_pull(arms, arms.ranking(), i, t, sample, rng)


def apem_step(arms, t, sample, rng):
    return _probe_and_pull(arms, arms.ranking(epsilon=0.0), 1, t, sample, rng)


def bernoulli_max_expectation(p, q):
    """E[max(X, Y)] for independent Bernoulli(p), Bernoulli(q)."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ParameterError(f"probabilities must lie in [0, 1], got ({p}, {q})")
    return p + (1.0 - p) * q


def expected_max(reward_model, p, q):
    if reward_model.kind == 'bernoulli':
        return bernoulli_max_expectation(p, q)
    if reward_model.kind == 'point':
        return max(p, q)
    value, _ = quad(lambda z: 1.0 - reward_model.cdf(p, z) * reward_model.cdf(q, z), 0.0, 1.0, limit=200)
    return float(value)


def hinted_regret(probes, means, target_rank=1, reward_model=None):
    """Cumulative max(0, u_(i) - E[max of the two probed draws]) per round."""
    means = np.asarray(means, dtype=float)
    probes = np.asarray(probes, dtype=np.int64).reshape(-1, 2)
    target = np.sort(means)[::-1][target_rank - 1]
    cache = {}
    increments = np.empty(len(probes))
    for row, (f, g) in enumerate(probes):
        key = (min(f, g), max(f, g))
        if key not in cache:
            if reward_model is None:
                cache[key] = bernoulli_max_expectation(means[f], means[g])
            else:
                cache[key] = expected_max(reward_model, means[f], means[g])
        increments[row] = max(0.0, target - cache[key])
    return np.cumsum(increments)


STEPS = {'allprobe': allprobe_step, 'apem': apem_step}


@dataclass
class HintedRun:
    pulled: np.ndarray
    probes: np.ndarray
    rewards: np.ndarray
    regret: np.ndarray
    means: np.ndarray


def run_hinted(market, algorithm, horizon, rng, epsilon=cfg.EPSILON, target_rank=cfg.TARGET_RANK):
    """Run a hinted bandit on the single agent of ``market``; arms are its firms."""
    if market.n != 1:
        raise ParameterError(f"hinted bandits need a single-agent market, got n={market.n}")
    if market.m < 2:
        raise ParameterError("hinted bandits need at least two arms")
    if horizon < 1:
        raise ParameterError(f"horizon must be at least 1, got {horizon}")
    if algorithm not in cfg.HINTED_ALGORITHMS:
        raise ParameterError(f"unknown hinted algorithm '{algorithm}'; known: {cfg.HINTED_ALGORITHMS}")

    arms = ArmState(market.m, epsilon)
    rank = target_rank if algorithm == 'eap' else 1

    def sample(arm, gen):
        return market.sample(Side.AGENT, 0, arm, gen)

    pulled = np.empty(horizon, dtype=np.int64)
    probes = np.empty((horizon, 2), dtype=np.int64)
    rewards = np.empty(horizon)
    for t in range(1, horizon + 1):
        if algorithm == 'eap':
            step = eap_step(arms, rank, t, sample, rng)
        else:
            step = STEPS[algorithm](arms, t, sample, rng)
        pulled[t - 1] = step.pulled
        probes[t - 1] = step.probes
        rewards[t - 1] = step.reward
    regret = hinted_regret(probes, market.agent_means[0], rank, market.reward_model)
    return HintedRun(pulled, probes, rewards, regret, arms.mu.copy())
