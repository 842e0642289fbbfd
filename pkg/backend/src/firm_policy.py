"""Firm-side strategic rejection and rejection-clock bookkeeping."""
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import SimulationConfig as cfg
from .errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass
class FirmState:
    """Rejection clocks of one firm; 0 means never."""
    r: np.ndarray
    c: int = 0
    mode: str = 'uncertain'
    strategic: bool = True

    @classmethod
    def fresh(cls, n, mode='uncertain', strategic=True):
        return cls(np.zeros(n, dtype=np.int64), 0, mode, strategic)


def strategic_rejection_decision(applicants, firm_est_list, state, t=None):
    """gamma = 0 iff an uncertain strategic firm has rejected someone it now ranks
    above its best applicant, more recently than its last vacancy."""
    if not applicants or state.mode == 'certain' or not state.strategic:
        return 1
    pool = set(applicants)
    best = next(a for a in firm_est_list.order if a in pool)
    for a in firm_est_list.above(best):
        if state.r[a] >= 1 and state.r[a] >= state.c:
            return 0
    return 1


def update_firm_rej_vars(state, t, gamma, applicants, hired, declined=()):
    if gamma:
        for a in set(applicants) - {hired} - set(declined):
            state.r[a] = t
    if hired is None:
        state.c = t
    return state


@dataclass
class FirmPolicy:
    n: int
    m: int
    mode: str = 'uncertain'
    strategic: bool = True
    states: list = field(init=False)

    def __post_init__(self):
        if self.mode not in cfg.FIRM_MODES:
            raise ParameterError(f"firm mode must be one of {cfg.FIRM_MODES}, got '{self.mode}'")
        self.states = [FirmState.fresh(self.n, self.mode, self.strategic) for _ in range(self.m)]

    @property
    def certain(self):
        return self.mode == 'certain'

    def decide(self, t, pools, firm_est):
        gamma = [strategic_rejection_decision(pools[f], firm_est.pref_list(f), self.states[f], t)
                 for f in range(self.m)]
        abstained = [f + 1 for f in range(self.m) if not gamma[f]]
        if abstained:
            logger.debug("round %d: firms %s reject strategically", t, abstained)
        return gamma

    def update(self, t, gamma, pools, firm_match, declined):
        for f, state in enumerate(self.states):
            update_firm_rej_vars(state, t, gamma[f], pools[f], firm_match[f], declined[f])
