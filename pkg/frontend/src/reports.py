"""Artifact writers: per-replication CSV series, summary and manifest JSON, stable-set text."""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from backend.src import __version__
from backend.src.config import SimulationConfig as cfg
from backend.src.harness import checkpoints, simulate, summarize

logger = logging.getLogger(__name__)


def series_rows(horizon, stride):
    """0-based row indices: every stride-th round plus exact checkpoint rounds."""
    rounds = set(range(stride, horizon + 1, stride)) | set(checkpoints(horizon))
    return np.array(sorted(rounds)) - 1


def create_series_frame(result, stride):
    """Wide regret series of one replication, 1-based agents and firms."""
    if result.hinted is not None:
        rows = series_rows(len(result.hinted.regret), stride)
        return pd.DataFrame({
            't': rows + 1,
            'regret': result.hinted.regret[rows],
            'pulled': result.hinted.pulled[rows] + 1,
        })
    regret = result.regret
    rows = series_rows(regret.horizon, stride)
    n = regret.optimal.shape[1]
    data = {'t': rows + 1}
    for name in ('optimal', 'pessimal', 'expected_optimal', 'expected_pessimal'):
        values = getattr(regret, name)
        for a in range(n):
            data[f'{name}_a{a + 1}'] = values[rows, a]
    matches = result.recorder.matches
    for a in range(n):
        data[f'match_a{a + 1}'] = pd.array([f + 1 if f >= 0 else None for f in matches[rows, a]], dtype='Int64')
    return pd.DataFrame(data)


def create_phase_frame(result):
    records = []
    for phase in result.phases:
        records.append({
            'phase': phase.index,
            't_gs': phase.t_gs,
            'commit_round': phase.commit_round,
            'end_round': phase.end_round,
            'triggers': ' '.join(sorted(phase.triggers)),
            'committed': ' '.join('-' if f is None else str(f + 1) for f in phase.committed),
            'perfect': int(phase.perfect),
            'committed_in_topn': ' '.join(str(int(x)) for x in phase.committed_in_topn),
        })
    columns = ['phase', 't_gs', 'commit_round', 'end_round', 'triggers', 'committed', 'perfect',
               'committed_in_topn']
    return pd.DataFrame.from_records(records, columns=columns)


def _write_csv(frame, path):
    frame.to_csv(path, index=False, float_format=cfg.CSV_FLOAT_FORMAT)
    return path.name


def write_artifacts(config, results, output_dir):
    """Write every artifact of an experiment; returns the manifest dict."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for result in results:
        tag = f'rep{result.index:03d}'
        files.append(_write_csv(create_series_frame(result, config.stride), out / f'series_{tag}.csv'))
        if result.recorder is not None and config.export_rounds:
            files.append(_write_csv(result.recorder.agent_frame(config.stride), out / f'rounds_{tag}.csv'))
            files.append(_write_csv(result.recorder.firm_frame(config.stride), out / f'firms_{tag}.csv'))
        if config.algorithm == 'drr':
            files.append(_write_csv(create_phase_frame(result), out / f'phases_{tag}.csv'))

    summary = summarize(config, results)
    with open(out / 'summary.json', 'w') as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    files.append('summary.json')

    manifest = {
        'tool': 'hintmatch',
        'version': __version__,
        'config_hash': config.config_hash(),
        'config': config.semantic_dict(),
        'seeds': config.seeds(),
        'files': files,
    }
    with open(out / 'manifest.json', 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    logger.info("wrote %d artifact(s) to %s", len(files) + 1, out)
    return manifest


def run_experiment(config, output_dir=None, progress=True):
    """Run all replications of ``config`` and write their artifacts."""
    target = cfg.output_dir(output_dir, config.output_dir)
    results = simulate(config, progress=progress)
    return write_artifacts(config, results, target)


def _pairs_text(matching):
    return ', '.join(f'(a{a + 1}, f{f + 1})' for a, f in matching.pairs())


def render_stable_set(stable_set, fixed_sequence=None):
    lines = [f'{len(stable_set)} stable matching(s)']
    for i, matching in enumerate(stable_set.matchings, start=1):
        lines.append(f'  {i}: {_pairs_text(matching)}')
    lines.append(f'agent-optimal:  {_pairs_text(stable_set.agent_optimal)}')
    lines.append(f'agent-pessimal: {_pairs_text(stable_set.agent_pessimal)}')
    if fixed_sequence is None:
        lines.append('alpha-reducible: no')
    else:
        pairs = ', '.join(f'(a{a + 1}, f{f + 1})' for a, f in fixed_sequence.pairs)
        lines.append(f'alpha-reducible: yes; fixed pairs {pairs}')
    return '\n'.join(lines)
