"""Deferred acceptance, stability checks and stable-set oracles."""
import logging
from collections import deque
from dataclasses import dataclass

from .config import SimulationConfig as cfg
from .errors import ParameterError, PreferenceError
from .market import Matching, PrefList, Side, ground_truth_prefs

logger = logging.getLogger(__name__)


def _as_prefs(lists, side, width):
    prefs = []
    for owner, item in enumerate(lists):
        pref = item if isinstance(item, PrefList) else PrefList(side, owner, tuple(item))
        if len(pref) != width:
            raise PreferenceError(f"{side.value} {owner}: list has {len(pref)} entries, expected {width}")
        prefs.append(pref)
    return prefs


def _check_shapes(agent_prefs, firm_prefs):
    n, m = len(agent_prefs), len(firm_prefs)
    if n < 1 or m < n:
        raise PreferenceError(f"need 1 <= n <= m lists, got {n} agent and {m} firm lists")
    return _as_prefs(agent_prefs, Side.AGENT, m), _as_prefs(firm_prefs, Side.FIRM, n)


def _deferred_acceptance(proposer_orders, receiver_ranks):
    """Receiver -> held proposer (or None) after proposers exhaust their lists."""
    held = [None] * len(receiver_ranks)
    next_choice = [0] * len(proposer_orders)
    free = deque(range(len(proposer_orders)))
    while free:
        p = free.popleft()
        if next_choice[p] >= len(proposer_orders[p]):
            continue
        r = proposer_orders[p][next_choice[p]]
        next_choice[p] += 1
        current = held[r]
        if current is None:
            held[r] = p
        elif receiver_ranks[r][p] < receiver_ranks[r][current]:
            held[r] = p
            free.append(current)
        else:
            free.append(p)
    return held


def gale_shapley(agent_prefs, firm_prefs, proposer=Side.AGENT):
    """Stable matching under the given lists.

    Agents proposing yields the agent-optimal stable matching, firms proposing
    the agent-pessimal one. Lists may be PrefLists or raw index sequences.
    """
    agent_prefs, firm_prefs = _check_shapes(agent_prefs, firm_prefs)
    n, m = len(agent_prefs), len(firm_prefs)
    if Side(proposer) is Side.AGENT:
        firm_hold = _deferred_acceptance([p.order for p in agent_prefs], [p.ranks for p in firm_prefs])
        match = [None] * n
        for f, a in enumerate(firm_hold):
            if a is not None:
                match[a] = f
        return Matching(tuple(match), m)
    agent_hold = _deferred_acceptance([p.order for p in firm_prefs], [p.ranks for p in agent_prefs])
    return Matching(tuple(agent_hold), m)


def blocking_pairs(matching, agent_prefs, firm_prefs):
    """Pairs (a, f) that both strictly prefer each other to their current partners."""
    agent_prefs, firm_prefs = _check_shapes(agent_prefs, firm_prefs)
    firm_match = matching.firm_match
    pairs = []
    for a, pref in enumerate(agent_prefs):
        current = matching.agent_match[a]
        candidates = pref.order if current is None else pref.above(current)
        for f in candidates:
            hire = firm_match[f]
            if hire is None or firm_prefs[f].prefers(a, hire):
                pairs.append((a, f))
    return sorted(pairs)


def is_stable(matching, agent_prefs, firm_prefs):
    return not blocking_pairs(matching, agent_prefs, firm_prefs)


@dataclass(frozen=True)
class StableSet:
    """All stable matchings of a market plus each side's extreme stable partners."""
    matchings: tuple
    agent_best: tuple
    agent_worst: tuple
    firm_best: tuple
    firm_worst: tuple

    def __len__(self):
        return len(self.matchings)

    def __contains__(self, matching):
        return matching in self.matchings

    @property
    def m(self):
        return len(self.firm_best)

    @property
    def agent_optimal(self):
        return Matching(self.agent_best, self.m)

    @property
    def agent_pessimal(self):
        return Matching(self.agent_worst, self.m)

    @property
    def unique(self):
        return len(self.matchings) == 1


def _stable_assignments(agent_prefs, firm_prefs):
    n, m = len(agent_prefs), len(firm_prefs)
    assignment = [None] * n
    used = [False] * m
    found = []

    def consistent(a, f):
        for b in range(a):
            g = assignment[b]
            if agent_prefs[a].prefers(g, f) and firm_prefs[g].prefers(a, b):
                return False
            if agent_prefs[b].prefers(f, g) and firm_prefs[f].prefers(b, a):
                return False
        return True

    def vacancies_unblocked():
        for f in range(m):
            if not used[f] and any(agent_prefs[a].prefers(f, assignment[a]) for a in range(n)):
                return False
        return True

    def extend(a):
        if a == n:
            if vacancies_unblocked():
                found.append(Matching(tuple(assignment), m))
            return
        for f in range(m):
            if used[f] or not consistent(a, f):
                continue
            assignment[a] = f
            used[f] = True
            extend(a + 1)
            used[f] = False
        assignment[a] = None

    extend(0)
    return found


def enumerate_stable_matchings(market):
    """Exhaustive stable-set oracle for small markets (n <= MAX_ENUMERATION_AGENTS)."""
    if market.n > cfg.MAX_ENUMERATION_AGENTS:
        raise ParameterError(
            f"stable-set enumeration supports n <= {cfg.MAX_ENUMERATION_AGENTS}, got n={market.n}")
    agent_prefs, firm_prefs = ground_truth_prefs(market)
    found = _stable_assignments(agent_prefs, firm_prefs)
    n, m = market.n, market.m

    agent_best, agent_worst = [], []
    for a in range(n):
        partners = {mt.agent_match[a] for mt in found}
        agent_best.append(min(partners, key=lambda f: agent_prefs[a].ranks[f]))
        agent_worst.append(max(partners, key=lambda f: agent_prefs[a].ranks[f]))

    firm_best, firm_worst = [], []
    for f in range(m):
        partners = {mt.firm_match[f] for mt in found} - {None}
        if not partners:
            firm_best.append(None)
            firm_worst.append(None)
            continue
        firm_best.append(min(partners, key=lambda a: firm_prefs[f].ranks[a]))
        firm_worst.append(max(partners, key=lambda a: firm_prefs[f].ranks[a]))

    logger.debug("enumerated %d stable matchings for n=%d m=%d", len(found), n, m)
    return StableSet(tuple(found), tuple(agent_best), tuple(agent_worst), tuple(firm_best), tuple(firm_worst))


@dataclass(frozen=True)
class FixedPairSequence:
    """Mutual-top pairs extracted one after another from shrinking sub-markets."""
    pairs: tuple

    def __len__(self):
        return len(self.pairs)

    def as_matching(self, n, m):
        return Matching.from_pairs(self.pairs, n, m)


def fixed_pairs(agent_prefs, firm_prefs, agents, firms):
    """Mutual top choices of the sub-market restricted to ``agents`` x ``firms``."""
    pairs = []
    for a in sorted(agents):
        top_firm = next(f for f in agent_prefs[a].order if f in firms)
        top_agent = next(b for b in firm_prefs[top_firm].order if b in agents)
        if top_agent == a:
            pairs.append((a, top_firm))
    return pairs


def alpha_reducibility(market):
    """Fixed-pair sequence of length n, or None when some sub-market has no fixed pair."""
    agent_prefs, firm_prefs = ground_truth_prefs(market)
    agents, firms = set(range(market.n)), set(range(market.m))
    sequence = []
    while agents:
        candidates = fixed_pairs(agent_prefs, firm_prefs, agents, firms)
        if not candidates:
            return None
        a, f = candidates[0]
        sequence.append((a, f))
        agents.discard(a)
        firms.discard(f)
    return FixedPairSequence(tuple(sequence))
