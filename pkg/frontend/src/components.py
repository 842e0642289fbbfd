import argparse

from backend.src.config import OUTPUT_DIR_ENV, SimulationConfig as cfg
from backend.src.named_markets import example_names


def add_run_controls(subparsers):
    """Controls for `run`"""
    run = subparsers.add_parser('run', help='Run an experiment config and write its artifacts')
    run.add_argument('config', help='Experiment config (JSON)')
    run.add_argument('--output-dir', default=None,
                     help=f'Output directory (overrides the config and ${OUTPUT_DIR_ENV}; '
                          f'default "{cfg.DEFAULT_OUTPUT_DIR}")')
    run.add_argument('--workers', type=int, default=None, help='Replication worker processes')
    run.add_argument('--no-progress', action='store_true', help='Hide the progress bar')
    return run


def add_validate_controls(subparsers):
    validate = subparsers.add_parser('validate', help='Check an experiment config without running it')
    validate.add_argument('config', help='Experiment config (JSON)')
    return validate


def add_examples_controls(subparsers):
    return subparsers.add_parser('examples', help='List the named example markets')


def add_stable_controls(subparsers):
    """Controls for `stable`: a market file or a named example"""
    stable = subparsers.add_parser('stable', help='Print the stable matchings of a market')
    source = stable.add_mutually_exclusive_group(required=True)
    source.add_argument('market', nargs='?', help='Market file (JSON)')
    source.add_argument('--example', choices=example_names(), help='Named example market')
    return stable


def create_parser():
    parser = argparse.ArgumentParser(
        prog='hintmatch',
        description='Learning stable matchings with interviews: simulation harness')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging verbosity')
    subparsers = parser.add_subparsers(dest='command', required=True)
    add_run_controls(subparsers)
    add_validate_controls(subparsers)
    add_examples_controls(subparsers)
    add_stable_controls(subparsers)
    return parser
