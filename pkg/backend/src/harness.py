"""Experiment configuration, seeded replications and aggregation."""
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from tqdm import tqdm

from .config import SimulationConfig as cfg
from .decentralized import DrrPolicy, make_agent_policy
from .engine import MarketSimulation
from .errors import ConfigError, ProtocolError
from .firm_policy import FirmPolicy
from .hinted_bandits import run_hinted
from .market import GeneratorParams, generate_alpha_reducible, generate_market, load_market
from .matching import enumerate_stable_matchings
from .metrics import RegretSeries, convergence_round, plateau_ratio
from .named_markets import named_example

logger = logging.getLogger(__name__)

CONFIG_FIELDS = {
    'market', 'algorithm', 'firm_mode', 'strategic_firms', 'agent_oracle', 'horizon', 'replications',
    'base_seed', 'lambda', 'epsilon', 'target_rank', 'reward_kind', 'stride', 'plateau_pairs',
    'export_rounds', 'workers', 'output_dir',
}
GENERATOR_FIELDS = {'n', 'm', 'min_gap', 'reward_kind', 'sigma', 'alpha_reducible', 'seed'}
UNHASHED_FIELDS = ('output_dir', 'workers')


@dataclass(frozen=True)
class ExperimentConfig:
    market: dict
    algorithm: str
    firm_mode: str = 'uncertain'
    strategic_firms: bool = True
    agent_oracle: bool = False
    horizon: int = cfg.DEFAULT_HORIZON
    replications: int = cfg.DEFAULT_REPLICATIONS
    base_seed: int = cfg.DEFAULT_BASE_SEED
    lam: Optional[float] = None
    epsilon: float = cfg.EPSILON
    target_rank: int = cfg.TARGET_RANK
    reward_kind: Optional[str] = None
    stride: int = cfg.DEFAULT_STRIDE
    plateau_pairs: tuple = ()
    export_rounds: bool = False
    workers: int = cfg.DEFAULT_WORKERS
    output_dir: Optional[str] = None

    @property
    def hinted(self):
        return self.algorithm in cfg.HINTED_ALGORITHMS

    def to_dict(self):
        data = asdict(self)
        data['lambda'] = data.pop('lam')
        data['plateau_pairs'] = [list(p) for p in self.plateau_pairs]
        return data

    def semantic_dict(self):
        data = self.to_dict()
        for key in UNHASHED_FIELDS:
            data.pop(key)
        return data

    def config_hash(self):
        canonical = json.dumps(self.semantic_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def seeds(self):
        return [self.base_seed + i for i in range(self.replications)]


def _require(condition, field_name, message):
    if not condition:
        raise ConfigError(field_name, message)


def _int_field(data, key, default, minimum=None):
    value = data.get(key, default)
    _require(isinstance(value, int) and not isinstance(value, bool), key, f"must be an integer, got {value!r}")
    if minimum is not None:
        _require(value >= minimum, key, f"must be at least {minimum}, got {value}")
    return value


def _bool_field(data, key, default, field_name=None):
    value = data.get(key, default)
    _require(isinstance(value, bool), field_name or key, f"must be true or false, got {value!r}")
    return value


def _validate_market(source):
    _require(isinstance(source, dict), 'market', "must be an object")
    kinds = [k for k in ('example', 'path', 'generator') if k in source]
    _require(len(kinds) == 1, 'market', "needs exactly one of 'example', 'path' or 'generator'")
    if 'example' in source:
        named_example(source['example'])
    if 'generator' in source:
        gen = source['generator']
        _require(isinstance(gen, dict), 'market.generator', "must be an object")
        unknown = set(gen) - GENERATOR_FIELDS
        _require(not unknown, 'market.generator', f"unknown fields {sorted(unknown)}")
        for key in ('n', 'm'):
            _require(isinstance(gen.get(key), int) and gen[key] >= 1, f'market.generator.{key}',
                     "must be a positive integer")
        _require(gen['m'] >= gen['n'], 'market.generator.m', "must be at least n")
        _bool_field(gen, 'alpha_reducible', False, 'market.generator.alpha_reducible')
        if 'reward_kind' in gen:
            _require(gen['reward_kind'] in cfg.REWARD_KINDS, 'market.generator.reward_kind',
                     f"must be one of {sorted(cfg.REWARD_KINDS)}")
    return dict(source)


def config_from_dict(data):
    """Validate a config document and build an ExperimentConfig."""
    _require(isinstance(data, dict), 'config', "must be an object")
    unknown = set(data) - CONFIG_FIELDS
    _require(not unknown, sorted(unknown)[0] if unknown else 'config', "unknown field")
    _require('market' in data, 'market', "is required")
    _require('algorithm' in data, 'algorithm', "is required")

    algorithm = data['algorithm']
    _require(algorithm in cfg.ALGORITHMS, 'algorithm', f"must be one of {sorted(cfg.ALGORITHMS)}")
    firm_mode = data.get('firm_mode', 'uncertain')
    _require(firm_mode in cfg.FIRM_MODES, 'firm_mode', f"must be one of {cfg.FIRM_MODES}")

    lam = data.get('lambda')
    if algorithm == 'eancdrr':
        _require(lam is not None, 'lambda', "is required for eancdrr")
        _require(isinstance(lam, (int, float)) and 0 < lam < 1, 'lambda', "must lie strictly between 0 and 1")
        lam = float(lam)
    else:
        _require(lam is None, 'lambda', f"only applies to eancdrr, not {algorithm}")

    epsilon = data.get('epsilon', cfg.EPSILON)
    _require(isinstance(epsilon, (int, float)) and epsilon >= 0, 'epsilon', "must be a non-negative number")
    reward_kind = data.get('reward_kind')
    _require(reward_kind is None or reward_kind in cfg.REWARD_KINDS, 'reward_kind',
             f"must be one of {sorted(cfg.REWARD_KINDS)}")

    horizon = _int_field(data, 'horizon', cfg.DEFAULT_HORIZON, 1)
    pairs = data.get('plateau_pairs', [])
    _require(isinstance(pairs, list), 'plateau_pairs', "must be a list of [t_early, t_late] pairs")
    plateau_pairs = []
    for pair in pairs:
        _require(isinstance(pair, (list, tuple)) and len(pair) == 2, 'plateau_pairs', f"bad pair {pair!r}")
        early, late = pair
        _require(isinstance(early, int) and isinstance(late, int) and 1 <= early < late <= horizon,
                 'plateau_pairs', f"need 1 <= t_early < t_late <= horizon, got {pair!r}")
        plateau_pairs.append((early, late))

    output_dir = data.get('output_dir')
    _require(output_dir is None or isinstance(output_dir, str), 'output_dir', "must be a string")

    config = ExperimentConfig(
        market=_validate_market(data['market']),
        algorithm=algorithm,
        firm_mode=firm_mode,
        strategic_firms=_bool_field(data, 'strategic_firms', True),
        agent_oracle=_bool_field(data, 'agent_oracle', False),
        horizon=horizon,
        replications=_int_field(data, 'replications', cfg.DEFAULT_REPLICATIONS, 1),
        base_seed=_int_field(data, 'base_seed', cfg.DEFAULT_BASE_SEED),
        lam=lam,
        epsilon=float(epsilon),
        target_rank=_int_field(data, 'target_rank', cfg.TARGET_RANK, 1),
        reward_kind=reward_kind,
        stride=_int_field(data, 'stride', cfg.DEFAULT_STRIDE, 1),
        plateau_pairs=tuple(plateau_pairs),
        export_rounds=_bool_field(data, 'export_rounds', False),
        workers=_int_field(data, 'workers', cfg.DEFAULT_WORKERS, 1),
        output_dir=output_dir,
    )
    if config.hinted:
        market = build_market(config)
        _require(market.n == 1, 'market', f"{algorithm} needs a single-agent market, got n={market.n}")
        _require(market.m >= 2, 'market', f"{algorithm} needs at least two arms")
        if algorithm == 'eap':
            _require(config.target_rank <= market.m - 1, 'target_rank', f"must lie in 1..{market.m - 1}")
    return config


def load_config(path):
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError('config', f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError('config', f"invalid JSON in {path}: {e}") from e
    return config_from_dict(data)


def build_market(config):
    """The experiment's market; identical for every replication."""
    source = config.market
    if 'example' in source:
        kind = config.reward_kind or cfg.DEFAULT_REWARD_KIND
        return named_example(source['example'], kind)
    if 'path' in source:
        try:
            return load_market(source['path'])
        except FileNotFoundError as e:
            raise ConfigError('market.path', f"file not found: {source['path']}") from e
    gen = source['generator']
    params = GeneratorParams(
        n=gen['n'],
        m=gen['m'],
        min_gap=gen.get('min_gap', cfg.DEFAULT_MIN_GAP),
        reward_kind=gen.get('reward_kind', config.reward_kind or cfg.DEFAULT_REWARD_KIND),
        sigma=gen.get('sigma', cfg.DEFAULT_SIGMA),
    )
    rng = np.random.default_rng(gen.get('seed', config.base_seed))
    if gen.get('alpha_reducible', False):
        return generate_alpha_reducible(params, rng)
    return generate_market(params, rng)


@dataclass
class ReplicationResult:
    index: int
    seed: int
    regret: Optional[RegretSeries] = None
    recorder: object = None
    convergence: Optional[int] = None
    phases: list = field(default_factory=list)
    phase_starts: list = field(default_factory=list)
    anomalies: int = 0
    invariants: dict = field(default_factory=dict)
    hinted: object = None


def check_invariants(recorder, n, m, certain):
    """Violation counts of the per-round protocol invariants over a run."""
    rounds = recorder.rounds
    vacant, changed = recorder.vacant[:rounds], recorder.changed[:rounds]
    apps = recorder.applications[:rounds]
    gamma = recorder.gamma[:rounds]
    collisions = 0
    for row in apps:
        firms = row[row >= 0]
        collisions += int(len(firms) != len(np.unique(firms)))
    unmatched_reward = np.sum((recorder.matches[:rounds] < 0) & (recorder.rewards[:rounds] > 0))
    return {
        'vacant_not_subset_changed': int(np.sum(np.any(vacant & ~changed, axis=1))),
        'vacancy_below_m_minus_n': int(np.sum(vacant.sum(axis=1) < m - n)),
        'collision_rounds': collisions,
        'reward_without_match': int(unmatched_reward),
        'certain_firm_abstentions': int(np.sum(gamma == 0)) if certain else 0,
    }


def run_replication(config, index, market=None, stable_set=None):
    """One seeded run; replication i uses seed base_seed + i."""
    seed = config.base_seed + index
    rng = np.random.default_rng(seed)
    market = market or build_market(config)

    if config.hinted:
        run = run_hinted(market, config.algorithm, config.horizon, rng, config.epsilon, config.target_rank)
        return ReplicationResult(index, seed, hinted=run)

    stable_set = stable_set or enumerate_stable_matchings(market)
    policy = make_agent_policy(config.algorithm, market.n, market.m, config.lam)
    firms = FirmPolicy(market.n, market.m, config.firm_mode, config.strategic_firms)
    sim = MarketSimulation(market, policy, firms, rng, agent_oracle=config.agent_oracle)
    try:
        recorder = sim.run(config.horizon)
    except ProtocolError as e:
        raise ProtocolError(f"replication {index} (seed {seed}): {e}", e.round_index) from e

    regret = RegretSeries.from_stable_set(market, stable_set, recorder.rewards, recorder.expected_rewards)
    result = ReplicationResult(
        index, seed,
        regret=regret,
        recorder=recorder,
        convergence=convergence_round(recorder.matches),
        anomalies=getattr(policy, 'anomalies', 0),
        invariants=check_invariants(recorder, market.n, market.m, firms.certain),
    )
    if isinstance(policy, DrrPolicy):
        result.phases = list(policy.phases)
        result.phase_starts = list(policy.phase_starts)
    return result


def _replication_task(args):
    config, index = args
    return run_replication(config, index)


def simulate(config, progress=True):
    """All replications, ordered by index regardless of scheduling."""
    logger.info("running %s: %d replication(s) x %d rounds (config %s)",
                config.algorithm, config.replications, config.horizon, config.config_hash()[:12])
    indices = range(config.replications)
    bar = tqdm(total=config.replications, desc=config.algorithm, disable=not progress)
    results = []
    try:
        if config.workers > 1 and config.replications > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for result in pool.map(_replication_task, [(config, i) for i in indices]):
                    results.append(result)
                    bar.update(1)
        else:
            market = build_market(config)
            stable_set = None if config.hinted else enumerate_stable_matchings(market)
            for i in indices:
                results.append(run_replication(config, i, market, stable_set))
                bar.update(1)
    finally:
        bar.close()
    results.sort(key=lambda r: r.index)
    logger.info("finished %s", config.algorithm)
    return results


def checkpoints(horizon):
    """Powers of ten up to the horizon, plus the horizon itself."""
    points = []
    t = 1
    while t <= horizon:
        points.append(t)
        t *= 10
    if points[-1] != horizon:
        points.append(horizon)
    return points


def _mean_sem(values):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    sem = float(stats.sem(values)) if len(values) > 1 else None
    return {'mean': mean, 'sem': sem}


def summarize(config, results):
    """Aggregate replication results into the JSON-ready summary document."""
    horizon = config.horizon
    pairs = list(config.plateau_pairs) or ([(max(horizon // 10, 1), horizon)] if horizon > 1 else [])
    summary = {
        'algorithm': config.algorithm,
        'horizon': horizon,
        'replications': config.replications,
        'seeds': config.seeds(),
        'config_hash': config.config_hash(),
    }
    points = checkpoints(horizon)

    if config.hinted:
        regret = np.stack([r.hinted.regret for r in results])
        summary['checkpoints'] = {str(t): _mean_sem(regret[:, t - 1]) for t in points}
        mean = regret.mean(axis=0)
        summary['plateau'] = [_plateau_entry(mean, early, late) for early, late in pairs]
        return summary

    n = results[0].regret.optimal.shape[1]
    per_agent = []
    for a in range(n):
        agent = {'agent': a + 1, 'checkpoints': {}, 'plateau': {}}
        for name in ('optimal', 'pessimal', 'expected_optimal', 'expected_pessimal'):
            stacked = np.stack([getattr(r.regret, name)[:, a] for r in results])
            agent['checkpoints'][name] = {str(t): _mean_sem(stacked[:, t - 1]) for t in points}
            if name.startswith('expected'):
                mean = stacked.mean(axis=0)
                agent['plateau'][name] = [_plateau_entry(mean, early, late) for early, late in pairs]
        per_agent.append(agent)
    summary['agents'] = per_agent
    summary['convergence_rounds'] = [r.convergence for r in results]
    summary['converged_fraction'] = float(np.mean([r.convergence is not None for r in results]))
    summary['anomalies'] = [r.anomalies for r in results]
    invariant_keys = results[0].invariants.keys()
    summary['invariant_violations'] = {k: int(sum(r.invariants[k] for r in results)) for k in invariant_keys}
    if config.algorithm == 'drr':
        summary['updating_phases'] = [len(r.phase_starts) for r in results]
        summary['late_phase_starts'] = [sum(1 for s in r.phase_starts if s > horizon // 2) for r in results]
        summary['imperfect_phases'] = [sum(1 for p in r.phases if not p.perfect) for r in results]
    return summary


def _plateau_entry(series, early, late):
    result = plateau_ratio(series, early, late)
    return {
        't_early': early,
        't_late': late,
        'ratio': None if not np.isfinite(result.ratio) else result.ratio,
        'slack': result.slack,
        'zero_denominator': result.zero_denominator,
    }

