"""Empirical-mean estimators and preference-list diagnostics."""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ObservationError, ParameterError
from .market import PrefList, Side

logger = logging.getLogger(__name__)


class EmpiricalEstimator:
    """Running sums and counts for one side of the market.

    Row ``owner`` holds that owner's observations of every peer. In oracle mode
    the estimator returns the ground-truth means with infinite counts and
    ignores records.
    """

    def __init__(self, side, rows, cols):
        self.side = Side(side)
        self.sums = np.zeros((rows, cols))
        self.counts = np.zeros((rows, cols))
        self._oracle_means = None

    @classmethod
    def oracle(cls, side, means):
        means = np.asarray(means, dtype=float)
        est = cls(side, *means.shape)
        est._oracle_means = means
        est.counts = np.full(means.shape, np.inf)
        return est

    @property
    def is_oracle(self):
        return self._oracle_means is not None

    @property
    def shape(self):
        return self.counts.shape

    def record(self, owner, peer, value):
        if not 0.0 <= value <= 1.0:
            raise ObservationError(
                f"{self.side.value} {owner} observed {value} for peer {peer}; values must lie in [0, 1]")
        if self.is_oracle:
            return
        self.sums[owner, peer] += value
        self.counts[owner, peer] += 1

    def count(self, owner, peer):
        return self.counts[owner, peer]

    def mean(self, owner, peer):
        """Empirical mean, or None before the first observation."""
        if self.is_oracle:
            return float(self._oracle_means[owner, peer])
        if self.counts[owner, peer] == 0:
            return None
        return float(self.sums[owner, peer] / self.counts[owner, peer])

    def means(self, owner):
        """Row of means with NaN for unobserved peers."""
        if self.is_oracle:
            return self._oracle_means[owner].copy()
        counts = self.counts[owner]
        with np.errstate(invalid='ignore', divide='ignore'):
            return np.where(counts > 0, self.sums[owner] / np.maximum(counts, 1), np.nan)

    def order(self, owner, means=None):
        """Peer indices: unobserved first, then mean descending, then index ascending."""
        row = self.means(owner) if means is None else np.asarray(means, dtype=float)
        observed = ~np.isnan(row)
        idx = np.arange(len(row))
        return np.lexsort((idx, -np.nan_to_num(row, nan=0.0), observed))

    def pref_list(self, owner):
        return PrefList(self.side, owner, tuple(int(x) for x in self.order(owner)))

    def best_among(self, owner, candidates, means=None):
        """Highest-ranked member of ``candidates`` under the estimated order, or None."""
        candidates = set(candidates)
        for peer in self.order(owner, means):
            if int(peer) in candidates:
                return int(peer)
        return None


def record(est, pair, value):
    owner, peer = pair
    est.record(owner, peer, value)
    return est


def estimated_pref_list(est, owner):
    return est.pref_list(owner)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    offending_indices: tuple

    def __bool__(self):
        return self.valid


def validity(est_list, truth_list, target):
    """Valid iff every peer the estimate ranks above ``target`` is also above it in truth."""
    truly_above = set(truth_list.above(target))
    offending = tuple(p for p in est_list.above(target) if p not in truly_above)
    return ValidityReport(not offending, offending)


def topk_aligned(est_list, truth_list, k):
    if not 1 <= k <= len(truth_list):
        raise ParameterError(f"k must lie in 1..{len(truth_list)}, got {k}")
    return est_list.top(k) == truth_list.top(k)


def global_alignment(agent_est, firm_est, agent_truth, firm_truth, k_agent, k_firm):
    """True when every agent's top-k_agent and every firm's top-k_firm are learned."""
    return (all(topk_aligned(agent_est.pref_list(a), agent_truth[a], k_agent) for a in range(len(agent_truth)))
            and all(topk_aligned(firm_est.pref_list(f), firm_truth[f], k_firm) for f in range(len(firm_truth))))
