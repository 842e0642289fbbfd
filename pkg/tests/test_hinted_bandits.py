import numpy as np
import pytest

from backend.src.errors import ParameterError
from backend.src.hinted_bandits import (ArmState, allprobe_step, apem_step, bernoulli_max_expectation, eap_step,
                                        expected_max, hinted_regret, run_hinted, ucb_prime)
from backend.src.market import Market, RewardModel
from tests.conftest import random_market


def fixed_sample(values):
    return lambda arm, rng: values[arm]


def arms_market(means, kind='bernoulli'):
    means = np.asarray(means, dtype=float)
    return Market(means[None, :], np.full((len(means), 1), 0.5), RewardModel(kind))


def test_ucb_prime_values():
    arms = ArmState(2)
    arms.record(0, 0.5)
    arms.record(0, 0.5)
    arms.record(1, 0.0)
    arms.record(1, 1.0)
    assert ucb_prime(arms, 0) == pytest.approx(0.5)
    assert ucb_prime(arms, 1) == pytest.approx(0.525)
    assert arms.ucb_prime(1, epsilon=0.0) == pytest.approx(0.5)


def test_unobserved_arm_has_no_index():
    arms = ArmState(3)
    arms.record(1, 1.0)
    assert arms.ucb_prime(0) is None
    assert arms.ranking() == [0, 2, 1]


def test_negative_epsilon():
    with pytest.raises(ParameterError):
        ArmState(2, epsilon=-0.1)


def test_allprobe_pulls_larger_probe():
    arms = ArmState(2)
    step = allprobe_step(arms, 1, fixed_sample({0: 0.2, 1: 0.8}), None)
    assert step.probes == (0, 1)
    assert step.pulled == 1
    assert step.reward == 0.8
    assert arms.counts.sum() == 3


def test_tied_probes_pull_lower_index():
    arms = ArmState(3)
    for arm, value in ((2, 0.9), (1, 0.5), (0, 0.1)):
        arms.record(arm, value)
    step = allprobe_step(arms, 3, fixed_sample({0: 0.4, 1: 0.4, 2: 0.4}), None)
    assert step.probes == (2, 1)
    assert step.pulled == 1


def test_probe_order_starts_with_round_robin():
    arms = ArmState(3)
    step = allprobe_step(arms, 4, fixed_sample({0: 0.1, 1: 0.2, 2: 0.3}), None)
    assert step.observed == (1, 0, 1)


def test_eap_probes_target_ranks():
    arms = ArmState(3)
    for arm, value in ((1, 0.9), (2, 0.5), (0, 0.1)):
        arms.record(arm, value)
    assert arms.ranking() == [1, 2, 0]
    step = eap_step(arms, 2, 3, fixed_sample({0: 0.3, 1: 0.3, 2: 0.3}), None)
    assert step.probes == (2, 0)


@pytest.mark.parametrize('rank', [0, 3])
def test_eap_rank_range(rank):
    with pytest.raises(ParameterError):
        eap_step(ArmState(3), rank, 1, fixed_sample({}), None)


def test_eap_first_rank_is_allprobe():
    market = arms_market([0.3, 0.7, 0.5])
    eap = run_hinted(market, 'eap', 300, np.random.default_rng(4), target_rank=1)
    allprobe = run_hinted(market, 'allprobe', 300, np.random.default_rng(4))
    assert np.array_equal(eap.pulled, allprobe.pulled)
    assert np.array_equal(eap.regret, allprobe.regret)


def test_apem_is_allprobe_without_variance_bonus():
    market = arms_market([0.3, 0.7, 0.5, 0.6])
    apem = run_hinted(market, 'apem', 300, np.random.default_rng(8))
    allprobe = run_hinted(market, 'allprobe', 300, np.random.default_rng(8), epsilon=0.0)
    assert np.array_equal(apem.probes, allprobe.probes)


def test_apem_step_ignores_arm_epsilon():
    arms = ArmState(2, epsilon=100.0)
    arms.record(0, 0.0)
    arms.record(0, 1.0)
    arms.record(1, 0.6)
    step = apem_step(arms, 2, fixed_sample({0: 0.0, 1: 0.0}), None)
    assert step.probes == (1, 0)


def test_bernoulli_max_expectation():
    assert bernoulli_max_expectation(0.5, 0.5) == pytest.approx(0.75)
    assert bernoulli_max_expectation(1.0, 0.3) == 1.0
    assert bernoulli_max_expectation(0.0, 0.0) == 0.0
    with pytest.raises(ParameterError):
        bernoulli_max_expectation(1.2, 0.5)


def test_bernoulli_max_expectation_matches_sampling(rng):
    x = rng.random(200_000) < 0.3
    y = rng.random(200_000) < 0.6
    assert abs(np.mean(x | y) - bernoulli_max_expectation(0.3, 0.6)) < 0.005


def test_expected_max_other_models():
    assert expected_max(RewardModel('point'), 0.3, 0.6) == 0.6
    gaussian = expected_max(RewardModel('gaussian', 0.1), 0.3, 0.6)
    assert 0.6 <= gaussian < 0.65


def test_hinted_regret_examples():
    assert hinted_regret([(1, 2)], [0.9, 0.1, 0.1])[-1] == pytest.approx(0.71)
    assert hinted_regret([(0, 1)], [0.9, 0.5])[-1] == 0.0
    assert list(hinted_regret([(1, 2)] * 3, [0.9, 0.1, 0.1])) == pytest.approx([0.71, 1.42, 2.13])


def test_run_hinted_needs_a_single_agent(rng):
    with pytest.raises(ParameterError):
        run_hinted(random_market(1, 2, 3), 'allprobe', 10, rng)
    with pytest.raises(ParameterError):
        run_hinted(arms_market([0.4]), 'allprobe', 10, rng)


def test_run_hinted_shapes(rng):
    run = run_hinted(arms_market([0.2, 0.8, 0.5]), 'allprobe', 50, rng)
    assert run.pulled.shape == (50,)
    assert run.probes.shape == (50, 2)
    assert np.all(np.diff(run.regret) >= 0)
    assert np.all(np.isin(run.pulled, [0, 1, 2]))


def test_run_hinted_reports_final_means(rng):
    run = run_hinted(arms_market([0.2, 0.8]), 'apem', 40, rng)
    assert run.means.shape == (2,)
    assert np.all((run.means >= 0.0) & (run.means <= 1.0))


@pytest.mark.slow
def test_apem_ranks_the_best_arm_first():
    market = arms_market([0.9, 0.1, 0.1])
    first = 0
    for seed in range(100):
        run = run_hinted(market, 'apem', 10_000, np.random.default_rng(seed))
        first += int(np.argmax(run.means)) == 0
    assert first >= 95
