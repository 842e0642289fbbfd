import numpy as np
import pytest

from backend.src.centralized import CentralizedInterviewAllocator
from backend.src.engine import MarketSimulation
from backend.src.errors import ParameterError
from backend.src.estimation import EmpiricalEstimator
from backend.src.firm_policy import FirmPolicy
from backend.src.market import (GeneratorParams, Market, PrefList, Side, generate_alpha_reducible,
                                ground_truth_prefs)
from backend.src.matching import enumerate_stable_matchings
from backend.src.metrics import (AlignmentTracker, InvalidityCounter, RegretSeries, convergence_round, gap_table,
                                 invalidity_counter, plateau_ratio, regret_update)
from backend.src.named_markets import named_example
from tests.conftest import point_market


def test_regret_update():
    assert list(regret_update([1.0, 0.0], [0.5, 0.9], [0.9, 0.5])) == pytest.approx([1.4, -0.4])


def test_never_matched_regret():
    series = RegretSeries.from_rewards(np.zeros((10, 1)), np.zeros((10, 1)), [0.9], [0.9])
    assert series.optimal[-1, 0] == pytest.approx(9.0)
    assert series.horizon == 10


def test_matched_to_best_partner_has_zero_regret():
    rewards = np.full((20, 2), [0.9, 0.7])
    series = RegretSeries.from_rewards(rewards, rewards, [0.9, 0.7], [0.5, 0.3])
    assert np.all(series.optimal == 0)
    assert np.all(series.pessimal < 0)


def test_regret_decomposition(rng):
    rewards = rng.random((50, 2))
    series = RegretSeries.from_rewards(rewards, rewards, [0.9, 0.7], [0.5, 0.3])
    t = np.arange(1, 51)[:, None]
    assert np.allclose(series.optimal - series.pessimal, t * np.array([0.4, 0.4]))


def test_regret_from_stable_set(drrs4):
    stable = enumerate_stable_matchings(drrs4)
    rewards = np.full((5, 3), 0.5)
    series = RegretSeries.from_stable_set(drrs4, stable, rewards, rewards)
    assert list(series.best_means) == pytest.approx([0.9, 0.9, 0.9])
    assert list(series.worst_means) == pytest.approx([0.1, 0.1, 0.5])


def test_gap_table_example():
    market = point_market([[0.9, 0.5]], [[0.7], [0.3]])
    table = gap_table(market, enumerate_stable_matchings(market))
    assert table.agent_optimal[0, 1] == pytest.approx(0.4)
    assert table.agent_optimal[0, 0] == 0
    assert table.unique
    assert np.isnan(table.firm_optimal[1]).all()


def test_gap_table_uses_both_extremes(drrs4):
    table = gap_table(drrs4, enumerate_stable_matchings(drrs4))
    means = drrs4.agent_means[0]
    assert np.allclose(table.agent_optimal[0], np.abs(means[0] - means))
    assert np.allclose(table.agent_pessimal[0], np.abs(means[2] - means))
    assert not table.unique
    assert np.all(table.agent_min > 0)


def test_unique_market_gaps():
    market = named_example('introstrategic', 'point')
    assert gap_table(market, enumerate_stable_matchings(market)).unique


def test_convergence_examples():
    assert convergence_round(np.array([[0, 1]] * 5)) == 1
    assert convergence_round(np.array([[0, 1], [1, 0], [1, 0]])) == 2
    assert convergence_round(np.array([[0, 1], [0, -1]])) is None
    assert convergence_round(np.array([[0, 1], [1, 0]])) == 2
    assert convergence_round(np.empty((0, 2), dtype=int)) is None


def test_plateau_examples():
    flat = np.concatenate([np.arange(1, 11), np.full(90, 10)])
    assert plateau_ratio(flat, 10, 100).ratio == 1.0
    linear = np.arange(1, 101, dtype=float)
    assert plateau_ratio(linear, 10, 100).ratio == pytest.approx(10.0)
    assert not plateau_ratio(linear, 10, 100).passes()


def test_plateau_zero_regret():
    result = plateau_ratio(np.zeros(100), 10, 100)
    assert result.ratio == 1.0
    assert result.zero_denominator
    assert result.passes()


def test_plateau_zero_denominator_with_late_regret():
    series = np.concatenate([np.zeros(50), np.ones(50)])
    result = plateau_ratio(series, 10, 100)
    assert result.zero_denominator
    assert result.ratio == float('inf')
    assert result.slack == 1.0


@pytest.mark.parametrize('early, late', [(10, 10), (20, 10), (0, 5), (10, 101)])
def test_plateau_ordering(early, late):
    with pytest.raises(ParameterError):
        plateau_ratio(np.ones(100), early, late)


def test_invalidity_counter():
    truth = [PrefList(Side.AGENT, 0, (0, 1, 2))]
    swapped = [PrefList(Side.AGENT, 0, (1, 0, 2))]
    assert invalidity_counter([truth] * 8, truth, [(0, 1)]) == {(0, 1): 0}
    rounds = [truth] * 3 + [swapped] * 5 + [truth] * 2
    assert invalidity_counter(rounds, truth, [(0, 0)]) == {(0, 0): 5}


def test_oracle_estimates_are_never_invalid(ucb3x3):
    agents, _ = ground_truth_prefs(ucb3x3)
    tracker = InvalidityCounter(agents, [(a, f) for a in range(3) for f in range(3)], midpoint=5)
    oracle = EmpiricalEstimator.oracle(Side.AGENT, ucb3x3.agent_means)
    for t in range(1, 11):
        tracker.observe(t, oracle, None)
    assert sum(tracker.counts.values()) == 0


def test_trackers_during_a_run(rng):
    market = named_example('coordfgs', 'point')
    agents, firms = ground_truth_prefs(market)
    alignment = AlignmentTracker(agents, firms, 3, 3)
    invalid = InvalidityCounter(agents, [(a, 0) for a in range(3)], midpoint=50)
    sim = MarketSimulation(market, CentralizedInterviewAllocator(), FirmPolicy(3, 3), rng,
                           trackers=(alignment, invalid))
    sim.run(100)
    assert alignment.aligned_rounds
    assert alignment.aligned_rounds[-1] == 100
    assert all(invalid.late_counts[pair] == 0 for pair in invalid.targets)


def test_invalidity_counter_splits_at_the_midpoint():
    truth = [PrefList(Side.AGENT, 0, (0, 1))]
    tracker = InvalidityCounter(truth, [(0, 0), (0, 1)], midpoint=3)
    est = EmpiricalEstimator(Side.AGENT, 1, 2)
    est.record(0, 0, 0.0)
    est.record(0, 1, 1.0)
    for t in range(1, 6):
        tracker.observe(t, est, None)
    assert tracker.counts == {(0, 0): 5, (0, 1): 0}
    assert tracker.late_counts == {(0, 0): 2, (0, 1): 0}


def invalid_halves(market, policy, firm_policy, horizon, seed):
    agents, _ = ground_truth_prefs(market)
    targets = [(a, f) for a in range(market.n) for f in range(market.m)]
    tracker = InvalidityCounter(agents, targets, midpoint=horizon // 2)
    MarketSimulation(market, policy, firm_policy, np.random.default_rng(seed), trackers=(tracker,)).run(horizon)
    late = sum(tracker.late_counts.values())
    return sum(tracker.counts.values()) - late, late


@pytest.mark.slow
def test_round_robin_interviewing_stops_producing_invalid_rounds():
    market = Market(np.array([[0.2, 0.5, 0.8]]), np.full((3, 1), 0.5))
    early = late = 0
    for seed in range(50):
        first, second = invalid_halves(market, CentralizedInterviewAllocator(), FirmPolicy(1, 3), 100_000, seed)
        early += first
        late += second
    assert early > 0
    assert late < 0.01 * early


@pytest.mark.slow
def test_centralized_run_invalid_rounds_concentrate_early():
    market = generate_alpha_reducible(GeneratorParams(3, 3, 0.2), np.random.default_rng(2024))
    early, late = invalid_halves(market, CentralizedInterviewAllocator(), FirmPolicy(3, 3), 100_000, 0)
    assert early > 0
    assert late < 0.01 * early
