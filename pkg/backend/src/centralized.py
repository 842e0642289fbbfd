"""Central interview allocation: a platform runs deferred acceptance on current estimates."""
from dataclasses import dataclass

from .engine import AgentAction, AgentPolicy
from .market import Side
from .matching import gale_shapley


def round_robin_firm(agent, t, m):
    """Exploration firm of 0-based ``agent`` at round t; cycles all firms every m rounds."""
    return (t + agent + 1) % m


@dataclass(frozen=True)
class CiaPlan:
    apply: tuple
    rr: tuple

    @property
    def interviews(self):
        # apply == rr is sampled twice
        return tuple((f, g) for f, g in zip(self.apply, self.rr))


def cia_plan(agent_est_lists, firm_est_lists, t):
    matching = gale_shapley(agent_est_lists, firm_est_lists, Side.AGENT)
    m = len(firm_est_lists)
    rr = tuple(round_robin_firm(a, t, m) for a in range(len(agent_est_lists)))
    return CiaPlan(matching.agent_match, rr)


class CentralizedInterviewAllocator(AgentPolicy):
    centralized = True

    def decide(self, t, views, rng):
        plan = cia_plan(views.agent_lists(), views.firm_lists(), t)
        return [AgentAction(pair, (apply,)) for pair, apply in zip(plan.interviews, plan.apply)]
