"""Decentralized agents.

Each agent decides from its own estimates, its own rejections and the broadcast
firm sets V' (vacant) or V (vacant or hire changed). ``DecentralizedPolicy``
dispatches every agent with only its own view and feedback.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SimulationConfig as cfg
from .centralized import CentralizedInterviewAllocator, round_robin_firm
from .engine import AgentAction, AgentPolicy
from .errors import ParameterError, ProtocolError

logger = logging.getLogger(__name__)

UPDATE = 'update'
COMMIT = 'commit'


def update_agent_rej_vars(r, t, feedback):
    """Stamp firms that turned the agent down in favour of another hire."""
    for f in feedback.rejected_by:
        r[f] = t
    return r


class DecentralizedAgent:
    def __init__(self, index, n, m):
        self.index, self.n, self.m = index, n, m
        self.r = np.zeros(m, dtype=np.int64)
        self.anomalies = 0

    def rr(self, t):
        return round_robin_firm(self.index, t, self.m)

    def act(self, t, view, rng):
        raise NotImplementedError

    def observe(self, t, feedback):
        update_agent_rej_vars(self.r, t, feedback)


def drr_candidate_set(r, t_gs):
    """Firms that have not rejected the agent since the phase started."""
    return {f for f in range(len(r)) if r[f] < t_gs}


@dataclass
class PhaseRecord:
    index: int
    t_gs: int
    commit_round: int
    committed: tuple = ()
    perfect: bool = False
    committed_in_topn: tuple = ()
    end_round: Optional[int] = None
    triggers: set = field(default_factory=set)


class DrrAgent(DecentralizedAgent):
    """Coordinated agent alternating fixed-length updating phases and committing."""

    def __init__(self, index, n, m):
        super().__init__(index, n, m)
        self.rho = UPDATE
        self.t_gs = 1
        self.phase_length = 3 * n * n
        self.snapshot = None
        self.frozen_candidates = None
        self.committed_firm = None
        self.last_apply = None
        self.strategically_rejected = False
        self.triggers = set()
        self.topn_at_gs = ()

    def switch_detect(self, view, vacant=None):
        """Local triggers ('inc', 'rej') and, given V', the global 'vac' trigger."""
        triggers = set()
        current = view.best_among(self.frozen_candidates)
        if current != self.committed_firm:
            triggers.add('inc')
        if self.strategically_rejected:
            triggers.add('rej')
        if vacant is not None and len(vacant) > self.m - self.n:
            triggers.add('vac')
        return triggers

    def act(self, t, view, rng):
        rr = self.rr(t)
        if self.rho == UPDATE and t < self.t_gs + self.phase_length:
            if self.snapshot is None:
                self.snapshot = view.means()
                self.topn_at_gs = view.top(self.n, self.snapshot)
            candidates = drr_candidate_set(self.r, self.t_gs)
            if not candidates:
                raise ProtocolError(f"agent {self.index + 1} has no drr candidate firm", t)
            target = view.best_among(candidates, self.snapshot)
            return AgentAction((target, rr), (target,))

        if self.rho == UPDATE:
            self.rho = COMMIT
            self.frozen_candidates = drr_candidate_set(self.r, self.t_gs)
            self.committed_firm = self.last_apply

        self.triggers = self.switch_detect(view)
        current = view.best_among(self.frozen_candidates)
        if self.triggers:
            # abstaining leaves a vacancy that every agent sees in V'
            return AgentAction((current, rr), ())
        return AgentAction((current, rr), (current,))

    def observe(self, t, feedback):
        super().observe(t, feedback)
        applied = feedback.applied[0] if feedback.applied else None
        if applied is not None and applied in feedback.vacant:
            self.strategically_rejected = True
        if self.rho == UPDATE:
            self.last_apply = applied
            return
        if len(feedback.vacant) > self.m - self.n:
            self.triggers.add('vac')
            self.start_phase(t + 1)

    def start_phase(self, t_gs):
        self.rho = UPDATE
        self.t_gs = t_gs
        self.r[:] = 0
        self.snapshot = None
        self.strategically_rejected = False


def ancdrr_candidate_set(r, last_changed):
    """Never-rejected firms plus firms whose hire changed after they rejected the agent."""
    return {f for f in range(len(r)) if r[f] == 0 or last_changed[f] > r[f]}


class AncdrrAgent(DecentralizedAgent):
    """Coordination-free agent driven by the hiring-change broadcast V."""

    def __init__(self, index, n, m):
        super().__init__(index, n, m)
        self.last_changed = np.zeros(m, dtype=np.int64)
        self.prev_apply = None

    def target(self, t, view):
        candidates = ancdrr_candidate_set(self.r, self.last_changed)
        if candidates:
            return view.best_among(candidates)
        fallback = self.prev_apply if self.prev_apply is not None else self.rr(t)
        self.anomalies += 1
        logger.warning("round %d: agent %d has no candidate firm, falling back to firm %d",
                       t, self.index + 1, fallback + 1)
        return fallback

    def act(self, t, view, rng):
        target = self.target(t, view)
        return AgentAction((target, self.rr(t)), (target,))

    def observe(self, t, feedback):
        super().observe(t, feedback)
        for f in feedback.changed:
            self.last_changed[f] = t
        self.prev_apply = feedback.applied[0] if feedback.applied else self.prev_apply


class EancdrrAgent(AncdrrAgent):
    """Randomized extension: interviews three firms and may apply to a move/stay pair."""

    def __init__(self, index, n, m, lam):
        super().__init__(index, n, m)
        if not 0.0 < lam < 1.0:
            raise ParameterError(f"lambda must lie strictly between 0 and 1, got {lam}")
        self.lam = lam
        self.anchor = None

    def act(self, t, view, rng):
        target = self.target(t, view)
        rr = self.rr(t)
        if self.anchor is None:
            return AgentAction((target, rr), (target,))
        move = rng.random() < self.lam
        interviews = (target, self.anchor, rr)
        if target == self.anchor:
            return AgentAction(interviews, (target,))
        return AgentAction(interviews, (target, self.anchor) if move else (self.anchor,))

    def observe(self, t, feedback):
        super().observe(t, feedback)
        if feedback.matched is not None:
            self.anchor = feedback.matched


class DecentralizedPolicy(AgentPolicy):
    def __init__(self, agents):
        self.agents = list(agents)

    @property
    def anomalies(self):
        return sum(agent.anomalies for agent in self.agents)

    def decide(self, t, views, rng):
        return [agent.act(t, views[agent.index], rng) for agent in self.agents]

    def observe(self, t, feedback):
        for agent in self.agents:
            agent.observe(t, feedback[agent.index])


class ExtendedPolicy(DecentralizedPolicy):
    interview_budget = cfg.EXTENDED_INTERVIEW_BUDGET


class DrrPolicy(DecentralizedPolicy):
    """drr agents plus the phase log; checks that all agents share one phase clock."""

    def __init__(self, n, m):
        super().__init__(DrrAgent(a, n, m) for a in range(n))
        self.phases = []
        self.phase_starts = [1]
        self._open = None

    def decide(self, t, views, rng):
        actions = super().decide(t, views, rng)
        lead = self.agents[0]
        if lead.rho == COMMIT and (self._open is None or self._open.t_gs != lead.t_gs):
            committed = tuple(agent.committed_firm for agent in self.agents)
            self._open = PhaseRecord(
                index=len(self.phases) + 1,
                t_gs=lead.t_gs,
                commit_round=t,
                committed=committed,
                perfect=None not in committed and len(set(committed)) == len(committed),
                committed_in_topn=tuple(agent.committed_firm in agent.topn_at_gs for agent in self.agents),
            )
            self.phases.append(self._open)
        return actions

    def observe(self, t, feedback):
        phase_before = self.agents[0].t_gs
        triggers = set()
        for agent in self.agents:
            if agent.rho == COMMIT:
                triggers |= agent.triggers
        super().observe(t, feedback)
        clocks = {(agent.rho, agent.t_gs) for agent in self.agents}
        if len(clocks) > 1:
            raise ProtocolError(f"drr agents lost phase synchronization: {sorted(clocks)}", t)
        lead = self.agents[0]
        if lead.t_gs != phase_before:
            triggers.add('vac')
            self.phase_starts.append(lead.t_gs)
            if self._open is not None:
                self._open.end_round = t
                self._open.triggers = triggers
            logger.info("round %d: drr updating phase starts at %d (triggers %s)", t, lead.t_gs, sorted(triggers))


def make_agent_policy(algorithm, n, m, lam=None):
    if algorithm == 'cia':
        return CentralizedInterviewAllocator()
    if algorithm == 'drr':
        return DrrPolicy(n, m)
    if algorithm == 'ancdrr':
        return DecentralizedPolicy(AncdrrAgent(a, n, m) for a in range(n))
    if algorithm == 'eancdrr':
        if lam is None:
            raise ParameterError("eancdrr needs lambda")
        return ExtendedPolicy(EancdrrAgent(a, n, m, lam) for a in range(n))
    raise ParameterError(f"unknown market algorithm '{algorithm}'; known: {cfg.MARKET_ALGORITHMS}")
