"""Synchronous round protocol: interviews, applications and hiring, feedback, rewards."""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np
import pandas as pd

from .config import SimulationConfig as cfg
from .errors import ParameterError, ProtocolError
from .estimation import EmpiricalEstimator
from .market import Matching, Side

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgentAction:
    """Interview multiset and applications in priority order (empty = abstain)."""
    interviews: tuple
    applications: tuple = ()


@dataclass(frozen=True)
class AgentFeedback:
    """What one agent learns at the end of a round; never reveals who a firm hired."""
    applied: tuple
    matched: Optional[int]
    rejected_by: tuple
    vacant: frozenset
    changed: frozenset


class AgentView:
    """One agent's private estimates."""

    def __init__(self, agent, estimator):
        self.agent = agent
        self._est = estimator

    @property
    def m(self):
        return self._est.shape[1]

    def means(self):
        return self._est.means(self.agent)

    def pref_list(self):
        return self._est.pref_list(self.agent)

    def best_among(self, candidates, means=None):
        return self._est.best_among(self.agent, candidates, means)

    def top(self, k, means=None):
        return tuple(int(f) for f in self._est.order(self.agent, means)[:k])


class PlatformView:
    """Everything a central platform sees: all estimated lists on both sides."""

    def __init__(self, agent_est, firm_est):
        self.agent_est = agent_est
        self.firm_est = firm_est

    def agent_lists(self):
        return [self.agent_est.pref_list(a) for a in range(self.agent_est.shape[0])]

    def firm_lists(self):
        return [self.firm_est.pref_list(f) for f in range(self.firm_est.shape[0])]


class AgentPolicy(ABC):
    centralized: ClassVar[bool] = False
    interview_budget: ClassVar[int] = cfg.INTERVIEW_BUDGET

    @abstractmethod
    def decide(self, t, views, rng):
        """Return one AgentAction per agent for round t."""

    def observe(self, t, feedback):
        """Receive one AgentFeedback per agent after round t."""


@dataclass(frozen=True)
class RoundOutcome:
    t: int
    interviews: tuple
    applications: tuple
    gamma: tuple
    matching: Matching
    rewards: tuple
    expected_rewards: tuple
    vacant: frozenset
    changed: frozenset


def validate_actions(actions, n, m, budget, t):
    if len(actions) != n:
        raise ProtocolError(f"policy returned {len(actions)} actions for {n} agents", t)
    for a, action in enumerate(actions):
        interviews = tuple(action.interviews)
        if not 2 <= len(interviews) <= budget:
            raise ProtocolError(
                f"agent {a + 1} interviews {len(interviews)} firms; budget allows 2..{budget}", t)
        if any(not 0 <= f < m for f in interviews + tuple(action.applications)):
            raise ProtocolError(f"agent {a + 1} refers to a firm outside 1..{m}", t)
        if len(set(action.applications)) != len(action.applications):
            raise ProtocolError(f"agent {a + 1} applies to the same firm twice", t)
        if not set(action.applications) <= set(interviews):
            raise ProtocolError(f"agent {a + 1} applies to a firm it did not interview", t)


def run_interviews(market, interview_sets, agent_est, firm_est, rng, budget=cfg.INTERVIEW_BUDGET, t=None):
    """Draw one agent-side and one firm-side signal per interviewed pair."""
    for a, firms in enumerate(interview_sets):
        if not 2 <= len(firms) <= budget:
            raise ProtocolError(f"agent {a + 1} interviews {len(firms)} firms; budget allows 2..{budget}", t)
        for f in firms:
            agent_est.record(a, f, market.sample(Side.AGENT, a, f, rng))
            firm_est.record(f, a, market.sample(Side.FIRM, f, a, rng))
    return agent_est, firm_est


def applicant_pools(applications, m):
    pools = [[] for _ in range(m)]
    for a, applied in enumerate(applications):
        for f in applied:
            pools[f].append(a)
    return pools


def resolve_applications(applications, firm_lists, gamma, m):
    """Offer rounds until no offer changes.

    Each hiring firm offers to its best applicant not yet tried; an agent keeps
    the offer that comes first in its application order and declines the rest.
    Returns the matching and, per firm, the agents that declined its offer.
    """
    pools = applicant_pools(applications, m)
    untried = [set(pool) if gamma[f] else set() for f, pool in enumerate(pools)]
    offer = [None] * m
    held = [None] * len(applications)
    declined = [set() for _ in range(m)]
    changed = True
    while changed:
        changed = False
        for f in range(m):
            if offer[f] is None and untried[f]:
                a = next(x for x in firm_lists[f].order if x in untried[f])
                untried[f].discard(a)
                offer[f] = a
                changed = True
        for a, applied in enumerate(applications):
            offers = [f for f in applied if offer[f] == a]
            if not offers:
                continue
            keep = offers[0]
            for f in offers[1:]:
                offer[f] = None
                declined[f].add(a)
            held[a] = keep
    return Matching(tuple(held), m), declined


def realize_rewards(market, matching, gamma, rng):
    """(realized, expected) reward per agent; unmatched agents get 0."""
    rewards, expected = [], []
    for a, f in enumerate(matching.agent_match):
        if f is None or not gamma[f]:
            rewards.append(0.0)
            expected.append(0.0)
            continue
        rewards.append(market.sample(Side.AGENT, a, f, rng))
        expected.append(market.mean(Side.AGENT, a, f))
    return tuple(rewards), tuple(expected)


def compute_feedback(matching, previous):
    """(V', V): vacant firms, and vacant firms plus firms whose hire changed."""
    now, before = matching.firm_match, previous.firm_match
    vacant = frozenset(f for f, a in enumerate(now) if a is None)
    changed = vacant | frozenset(f for f in range(len(now)) if now[f] != before[f])
    return vacant, changed


class RunRecorder:
    """Per-round arrays of one run; unmatched and unused slots are -1."""

    def __init__(self, n, m, horizon, slots=cfg.EXTENDED_INTERVIEW_BUDGET):
        self.n, self.m, self.horizon = n, m, horizon
        self.rounds = 0
        self.matches = np.full((horizon, n), -1, dtype=np.int64)
        self.rewards = np.zeros((horizon, n))
        self.expected_rewards = np.zeros((horizon, n))
        self.gamma = np.ones((horizon, m), dtype=np.int8)
        self.vacant = np.zeros((horizon, m), dtype=bool)
        self.changed = np.zeros((horizon, m), dtype=bool)
        self.interviews = np.full((horizon, n, slots), -1, dtype=np.int64)
        self.applications = np.full((horizon, n, 2), -1, dtype=np.int64)

    def append(self, outcome):
        i = self.rounds
        if i >= self.horizon:
            raise ProtocolError(f"recorder sized for {self.horizon} rounds", outcome.t)
        self.matches[i] = [-1 if f is None else f for f in outcome.matching.agent_match]
        self.rewards[i] = outcome.rewards
        self.expected_rewards[i] = outcome.expected_rewards
        self.gamma[i] = outcome.gamma
        self.vacant[i, list(outcome.vacant)] = True
        self.changed[i, list(outcome.changed)] = True
        for a in range(self.n):
            for slot, f in enumerate(outcome.interviews[a]):
                self.interviews[i, a, slot] = f
            for slot, f in enumerate(outcome.applications[a]):
                self.applications[i, a, slot] = f
        self.rounds += 1

    def rows(self, stride=1):
        return np.arange(0, self.rounds, stride)

    def agent_frame(self, stride=1):
        """Long per-(round, agent) table with 1-based indices."""
        records = []
        for i in self.rows(stride):
            for a in range(self.n):
                records.append({
                    't': i + 1,
                    'agent': a + 1,
                    'interviewed': ' '.join(str(f + 1) for f in self.interviews[i, a] if f >= 0),
                    'applied': ' '.join(str(f + 1) for f in self.applications[i, a] if f >= 0),
                    'matched': self.matches[i, a] + 1 if self.matches[i, a] >= 0 else None,
                    'reward': self.rewards[i, a],
                })
        columns = ['t', 'agent', 'interviewed', 'applied', 'matched', 'reward']
        return pd.DataFrame.from_records(records, columns=columns)

    def firm_frame(self, stride=1):
        rows = self.rows(stride)
        t = np.repeat(rows + 1, self.m)
        firm = np.tile(np.arange(1, self.m + 1), len(rows))
        return pd.DataFrame({
            't': t,
            'firm': firm,
            'gamma': self.gamma[rows].ravel(),
            'vacant': self.vacant[rows].ravel().astype(int),
            'changed': self.changed[rows].ravel().astype(int),
        })


class MarketSimulation:
    """Runs the round protocol for one market, one agent policy and one firm policy."""

    def __init__(self, market, agent_policy, firm_policy, rng, agent_oracle=False, trackers=()):
        self.market = market
        self.agent_policy = agent_policy
        self.firm_policy = firm_policy
        self.rng = rng
        n, m = market.n, market.m
        if agent_oracle:
            self.agent_est = EmpiricalEstimator.oracle(Side.AGENT, market.agent_means)
        else:
            self.agent_est = EmpiricalEstimator(Side.AGENT, n, m)
        if firm_policy.certain:
            self.firm_est = EmpiricalEstimator.oracle(Side.FIRM, market.firm_means)
        else:
            self.firm_est = EmpiricalEstimator(Side.FIRM, m, n)
        self.trackers = list(trackers)
        self.t = 1
        self.previous_matching = Matching.empty(n, m)

    def _views(self):
        if self.agent_policy.centralized:
            return PlatformView(self.agent_est, self.firm_est)
        return [AgentView(a, self.agent_est) for a in range(self.market.n)]

    def step(self):
        t, market = self.t, self.market
        n, m = market.n, market.m
        actions = list(self.agent_policy.decide(t, self._views(), self.rng))
        validate_actions(actions, n, m, self.agent_policy.interview_budget, t)

        interviews = tuple(tuple(int(f) for f in act.interviews) for act in actions)
        applications = tuple(tuple(int(f) for f in act.applications) for act in actions)
        run_interviews(market, interviews, self.agent_est, self.firm_est, self.rng,
                       self.agent_policy.interview_budget, t)

        pools = applicant_pools(applications, m)
        gamma = self.firm_policy.decide(t, pools, self.firm_est)
        firm_lists = [self.firm_est.pref_list(f) for f in range(m)]
        matching, declined = resolve_applications(applications, firm_lists, gamma, m)
        rewards, expected = realize_rewards(market, matching, gamma, self.rng)
        vacant, changed = compute_feedback(matching, self.previous_matching)

        self.firm_policy.update(t, gamma, pools, matching.firm_match, declined)
        feedback = []
        for a in range(n):
            match = matching.agent_match[a]
            turned_down = {f for f in range(m) if a in declined[f]}
            rejected = tuple(f for f in applications[a]
                             if f != match and f not in turned_down and f not in vacant)
            feedback.append(AgentFeedback(applications[a], match, rejected, vacant, changed))
        self.agent_policy.observe(t, feedback)

        outcome = RoundOutcome(t, interviews, applications, tuple(int(g) for g in gamma), matching,
                               rewards, expected, vacant, changed)
        for tracker in self.trackers:
            tracker.observe(t, self.agent_est, self.firm_est)
        self.previous_matching = matching
        self.t += 1
        return outcome

    def run(self, horizon, recorder=None):
        if horizon < 1:
            raise ParameterError(f"horizon must be at least 1, got {horizon}")
        recorder = recorder or RunRecorder(self.market.n, self.market.m, horizon)
        for _ in range(horizon):
            recorder.append(self.step())
        return recorder


def run_horizon(market, agent_policy, firm_policy, horizon, rng, recorder=None, agent_oracle=False):
    """Execute ``horizon`` rounds; returns (recorder, simulation)."""
    sim = MarketSimulation(market, agent_policy, firm_policy, rng, agent_oracle=agent_oracle)
    return sim.run(horizon, recorder), sim
