import dataclasses
import json

import numpy as np
import pandas as pd
import pytest

from backend.src.config import OUTPUT_DIR_ENV, SimulationConfig as cfg
from backend.src.errors import ConfigError
from backend.src.harness import (build_market, checkpoints, config_from_dict, load_config, run_replication,
                                 simulate, summarize)
from backend.src.market import dump_market, ground_truth_prefs
from backend.src.matching import enumerate_stable_matchings
from frontend.src.reports import render_stable_set, run_experiment, series_rows
from tests.conftest import random_market


def base_config(**overrides):
    data = {'market': {'example': 'coordfgs'}, 'algorithm': 'cia', 'horizon': 100, 'replications': 2,
            'base_seed': 7}
    data.update(overrides)
    return data


def write_config(tmp_path, data, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_load_config(tmp_path):
    config = load_config(write_config(tmp_path, base_config()))
    assert config.algorithm == 'cia'
    assert config.seeds() == [7, 8]
    assert config.firm_mode == 'uncertain'


def test_named_example_expands_to_tables(tmp_path):
    config = load_config(write_config(tmp_path, base_config(market={'example': 'drrs4'})))
    agents, firms = ground_truth_prefs(build_market(config))
    assert [a.order for a in agents] == [(0, 1, 2), (1, 2, 0), (2, 1, 0)]
    assert [f.order for f in firms] == [(1, 2, 0), (2, 0, 1), (0, 1, 2)]


@pytest.mark.parametrize('overrides, field', [
    ({'algorithm': 'eancdrr'}, 'lambda'),
    ({'algorithm': 'eancdrr', 'lambda': 1.0}, 'lambda'),
    ({'lambda': 0.5}, 'lambda'),
    ({'horizon': 0}, 'horizon'),
    ({'market': {'example': 'nosuch'}}, 'market.example'),
    ({'algorithm': 'ucb'}, 'algorithm'),
    ({'replications': 'many'}, 'replications'),
    ({'colour': 'blue'}, 'colour'),
    ({'plateau_pairs': [[100, 10]]}, 'plateau_pairs'),
    ({'market': {'generator': {'n': 3, 'm': 2}}}, 'market.generator.m'),
    ({'strategic_firms': 'false'}, 'strategic_firms'),
    ({'agent_oracle': 0}, 'agent_oracle'),
    ({'export_rounds': 'true'}, 'export_rounds'),
    ({'market': {'generator': {'n': 2, 'm': 3, 'alpha_reducible': 'yes'}}}, 'market.generator.alpha_reducible'),
])
def test_config_errors_name_the_field(overrides, field):
    with pytest.raises(ConfigError) as e:
        config_from_dict(base_config(**overrides))
    assert e.value.field == field


def test_unknown_example_lists_known_names():
    with pytest.raises(ConfigError, match='introstrategic'):
        config_from_dict(base_config(market={'example': 'nosuch'}))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'absent.json')


def test_hinted_algorithms_need_one_agent():
    with pytest.raises(ConfigError):
        config_from_dict(base_config(algorithm='allprobe'))
    config = config_from_dict(base_config(algorithm='allprobe',
                                          market={'generator': {'n': 1, 'm': 4, 'min_gap': 0.1}}))
    assert config.hinted


def test_config_hash_ignores_plumbing():
    config = config_from_dict(base_config())
    moved = dataclasses.replace(config, output_dir='/tmp/elsewhere', workers=4)
    assert moved.config_hash() == config.config_hash()
    assert dataclasses.replace(config, horizon=101).config_hash() != config.config_hash()
    assert dataclasses.replace(config, base_seed=8).config_hash() != config.config_hash()


def test_market_from_path(tmp_path):
    market = random_market(3, 2, 3, 0.1)
    dump_market(market, tmp_path / 'market.json')
    config = config_from_dict(base_config(market={'path': str(tmp_path / 'market.json')}))
    assert build_market(config) == market


def test_missing_market_file(tmp_path):
    config = config_from_dict(base_config(market={'path': str(tmp_path / 'none.json')}))
    with pytest.raises(ConfigError):
        build_market(config)


def test_generated_market_is_shared_by_replications():
    config = config_from_dict(base_config(market={'generator': {'n': 2, 'm': 3, 'min_gap': 0.1, 'seed': 5}}))
    assert build_market(config) == build_market(dataclasses.replace(config, base_seed=99))


def test_checkpoints():
    assert checkpoints(100) == [1, 10, 100]
    assert checkpoints(250) == [1, 10, 100, 250]
    assert checkpoints(1) == [1]


def test_series_rows_include_checkpoints():
    assert list(series_rows(100, 30) + 1) == [1, 10, 30, 60, 90, 100]


def test_replication_reruns_alone():
    config = config_from_dict(base_config())
    results = simulate(config, progress=False)
    again = run_replication(config, 1)
    assert again.seed == 8
    assert np.array_equal(results[1].recorder.matches, again.recorder.matches)
    assert np.array_equal(results[1].regret.optimal, again.regret.optimal)


def test_parallel_replications_match_serial():
    config = config_from_dict(base_config(replications=3))
    serial = simulate(config, progress=False)
    parallel = simulate(dataclasses.replace(config, workers=2), progress=False)
    assert [r.index for r in parallel] == [0, 1, 2]
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.regret.optimal, b.regret.optimal)


def test_summary_contents():
    config = config_from_dict(base_config(algorithm='drr', horizon=200, firm_mode='certain'))
    summary = summarize(config, simulate(config, progress=False))
    assert summary['seeds'] == [7, 8]
    assert set(summary['agents'][0]['checkpoints']['optimal']) == {'1', '10', '100', '200'}
    assert summary['agents'][0]['plateau']['expected_optimal'][0]['t_early'] == 20
    assert summary['invariant_violations']['certain_firm_abstentions'] == 0
    assert all(count >= 1 for count in summary['updating_phases'])
    assert summary['invariant_violations']['vacancy_below_m_minus_n'] == 0


def test_hinted_summary():
    config = config_from_dict(base_config(algorithm='apem', horizon=50,
                                          market={'generator': {'n': 1, 'm': 3, 'min_gap': 0.1}}))
    summary = summarize(config, simulate(config, progress=False))
    assert set(summary['checkpoints']) == {'1', '10', '50'}
    assert summary['plateau'][0]['t_late'] == 50


def test_single_replication_artifacts(tmp_path):
    config = config_from_dict(base_config(replications=1, stride=10))
    manifest = run_experiment(config, tmp_path, progress=False)
    series = sorted(p.name for p in tmp_path.glob('series_*.csv'))
    assert series == ['series_rep000.csv']
    frame = pd.read_csv(tmp_path / 'series_rep000.csv')
    assert len(frame) <= 100
    assert frame['t'].iloc[-1] == 100
    assert {'optimal_a1', 'pessimal_a3', 'match_a2'} <= set(frame.columns)
    stored = json.loads((tmp_path / 'manifest.json').read_text())
    assert stored['config_hash'] == manifest['config_hash'] == config.config_hash()
    assert 'summary.json' in stored['files']


def test_runs_are_byte_identical(tmp_path):
    config = config_from_dict(base_config(algorithm='ancdrr', export_rounds=True))
    run_experiment(config, tmp_path / 'first', progress=False)
    run_experiment(config, tmp_path / 'second', progress=False)
    names = sorted(p.name for p in (tmp_path / 'first').glob('*.csv'))
    assert 'rounds_rep000.csv' in names
    for name in names:
        assert (tmp_path / 'first' / name).read_bytes() == (tmp_path / 'second' / name).read_bytes()


def test_drr_writes_phase_log(tmp_path):
    config = config_from_dict(base_config(algorithm='drr', replications=1))
    run_experiment(config, tmp_path, progress=False)
    phases = pd.read_csv(tmp_path / 'phases_rep000.csv')
    assert phases['t_gs'].iloc[0] == 1
    assert phases['commit_round'].iloc[0] == 28


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / 'env'))
    assert cfg.output_dir() == str(tmp_path / 'env')
    assert cfg.output_dir(configured='from-config') == 'from-config'
    assert cfg.output_dir('flag', 'from-config') == 'flag'
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert cfg.output_dir() == cfg.DEFAULT_OUTPUT_DIR


def test_env_output_dir_used_by_run(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / 'env'))
    run_experiment(config_from_dict(base_config(replications=1, horizon=20)), progress=False)
    assert (tmp_path / 'env' / 'manifest.json').exists()


def test_render_stable_set(drrs4):
    text = render_stable_set(enumerate_stable_matchings(drrs4))
    assert text.startswith('2 stable matching(s)')
    assert 'agent-optimal:  (a1, f1), (a2, f2), (a3, f3)' in text
    assert 'alpha-reducible: no' in text
