"""Regret accounting, reward gaps, convergence and per-round diagnostics."""
import logging
from dataclasses import dataclass

import numpy as np

from .config import SimulationConfig as cfg
from .errors import ParameterError
from .estimation import global_alignment, validity

logger = logging.getLogger(__name__)


def regret_update(cumulative, rewards, baselines):
    """One round: cumulative + (baseline - realized reward) per agent."""
    return np.asarray(cumulative, dtype=float) + np.asarray(baselines, dtype=float) - np.asarray(rewards, dtype=float)


@dataclass
class RegretSeries:
    """Cumulative regret per round (rows) and agent (columns).

    ``optimal``/``pessimal`` use realized rewards; the ``expected_*`` pair uses
    the mean of the matched pair instead of the draw.
    """
    optimal: np.ndarray
    pessimal: np.ndarray
    expected_optimal: np.ndarray
    expected_pessimal: np.ndarray
    best_means: np.ndarray
    worst_means: np.ndarray

    @classmethod
    def from_rewards(cls, rewards, expected_rewards, best_means, worst_means):
        rewards = np.asarray(rewards, dtype=float)
        expected_rewards = np.asarray(expected_rewards, dtype=float)
        best = np.asarray(best_means, dtype=float)
        worst = np.asarray(worst_means, dtype=float)
        return cls(
            optimal=np.cumsum(best - rewards, axis=0),
            pessimal=np.cumsum(worst - rewards, axis=0),
            expected_optimal=np.cumsum(best - expected_rewards, axis=0),
            expected_pessimal=np.cumsum(worst - expected_rewards, axis=0),
            best_means=best,
            worst_means=worst,
        )

    @classmethod
    def from_stable_set(cls, market, stable_set, rewards, expected_rewards):
        best = [market.agent_means[a, f] for a, f in enumerate(stable_set.agent_best)]
        worst = [market.agent_means[a, f] for a, f in enumerate(stable_set.agent_worst)]
        return cls.from_rewards(rewards, expected_rewards, best, worst)

    @property
    def horizon(self):
        return self.optimal.shape[0]


@dataclass(frozen=True)
class GapTable:
    """Absolute reward gaps to the partners of the two extreme stable matchings.

    Barred tables use the agent-optimal stable matching, which for firms is
    their pessimal partner; underlined tables use the agent-pessimal one.
    Firms without a stable partner have NaN rows.
    """
    agent_optimal: np.ndarray
    agent_pessimal: np.ndarray
    firm_optimal: np.ndarray
    firm_pessimal: np.ndarray
    agent_min: np.ndarray
    firm_min: np.ndarray

    @property
    def unique(self):
        return (np.array_equal(self.agent_optimal, self.agent_pessimal)
                and np.array_equal(self.firm_optimal, self.firm_pessimal, equal_nan=True))


def _row_min_positive(*tables):
    stacked = np.concatenate(tables, axis=1)
    out = np.full(stacked.shape[0], np.nan)
    for i, row in enumerate(stacked):
        positive = row[(row > 0) & ~np.isnan(row)]
        if positive.size:
            out[i] = positive.min()
    return out


def gap_table(market, stable_set):
    agent = market.agent_means
    firm = market.firm_means
    best = np.array([agent[a, f] for a, f in enumerate(stable_set.agent_best)])
    worst = np.array([agent[a, f] for a, f in enumerate(stable_set.agent_worst)])
    agent_optimal = np.abs(best[:, None] - agent)
    agent_pessimal = np.abs(worst[:, None] - agent)

    def firm_gaps(partners):
        base = np.array([np.nan if a is None else firm[f, a] for f, a in enumerate(partners)])
        return np.abs(base[:, None] - firm)

    firm_optimal = firm_gaps(stable_set.agent_optimal.firm_match)
    firm_pessimal = firm_gaps(stable_set.agent_pessimal.firm_match)
    return GapTable(agent_optimal, agent_pessimal, firm_optimal, firm_pessimal,
                    _row_min_positive(agent_optimal, agent_pessimal),
                    _row_min_positive(firm_optimal, firm_pessimal))


def convergence_round(matches):
    """Smallest 1-based t after which every agent keeps the same firm; None if none.

    ``matches`` is a rounds x agents array with -1 for unmatched.
    """
    matches = np.asarray(matches)
    if matches.size == 0 or np.any(matches[-1] < 0):
        return None
    differs = np.any(matches != matches[-1], axis=1)
    last_diff = np.flatnonzero(differs)
    if last_diff.size == 0:
        return 1
    return int(last_diff[-1]) + 2


@dataclass(frozen=True)
class PlateauResult:
    ratio: float
    slack: float
    zero_denominator: bool

    def passes(self, threshold=cfg.PLATEAU_THRESHOLD):
        return self.ratio <= threshold


def plateau_ratio(series, t_early, t_late):
    """Cumulative value at t_late over its value at t_early (1-based rounds)."""
    series = np.asarray(series, dtype=float)
    if not 1 <= t_early < t_late <= len(series):
        raise ParameterError(f"need 1 <= t_early < t_late <= {len(series)}, got ({t_early}, {t_late})")
    early, late = series[t_early - 1], series[t_late - 1]
    slack = float(late - early)
    if abs(early) <= cfg.ZERO_REGRET_TOLERANCE:
        if abs(late) <= cfg.ZERO_REGRET_TOLERANCE:
            return PlateauResult(1.0, slack, True)
        logger.warning("plateau ratio at (%d, %d) has zero denominator; late value %.6g", t_early, t_late, late)
        return PlateauResult(float('inf'), slack, True)
    return PlateauResult(float(late / early), slack, False)


def invalidity_counter(est_lists_per_round, truth_lists, targets):
    """Rounds in which each (owner, target) estimate is invalid.

    ``est_lists_per_round`` yields, per round, a sequence of PrefLists indexed by owner.
    """
    counts = {pair: 0 for pair in targets}
    for lists in est_lists_per_round:
        for owner, target in targets:
            if not validity(lists[owner], truth_lists[owner], target).valid:
                counts[(owner, target)] += 1
    return counts


class InvalidityCounter:
    """Per-round tracker counting invalid rounds of agent-side estimates."""

    def __init__(self, truth_lists, targets, midpoint=None):
        self.truth_lists = truth_lists
        self.targets = list(targets)
        self.midpoint = midpoint
        self.counts = {pair: 0 for pair in self.targets}
        self.late_counts = {pair: 0 for pair in self.targets}

    def observe(self, t, agent_est, firm_est):
        for owner, target in self.targets:
            if not validity(agent_est.pref_list(owner), self.truth_lists[owner], target).valid:
                self.counts[(owner, target)] += 1
                if self.midpoint is not None and t > self.midpoint:
                    self.late_counts[(owner, target)] += 1


class AlignmentTracker:
    """Rounds in which every agent's top-k and every firm's top-k estimates match the truth."""

    def __init__(self, agent_truth, firm_truth, k_agent, k_firm):
        self.agent_truth = agent_truth
        self.firm_truth = firm_truth
        self.k_agent = k_agent
        self.k_firm = k_firm
        self.aligned_rounds = []

    def observe(self, t, agent_est, firm_est):
        if global_alignment(agent_est, firm_est, self.agent_truth, self.firm_truth, self.k_agent, self.k_firm):
            self.aligned_rounds.append(t)
