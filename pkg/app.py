import dataclasses
import logging
import sys

from backend.src.errors import HintmatchError
from backend.src.harness import load_config
from backend.src.market import load_market
from backend.src.matching import alpha_reducibility, enumerate_stable_matchings
from backend.src.named_markets import EXAMPLES, example_names, named_example
from frontend.src.components import create_parser
from frontend.src.reports import render_stable_set, run_experiment

logger = logging.getLogger('hintmatch')


def run_command(args):
    config = load_config(args.config)
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)
    manifest = run_experiment(config, args.output_dir, progress=not args.no_progress)
    print(f"config {manifest['config_hash'][:12]}: {len(manifest['files'])} file(s) written")


def validate_command(args):
    config = load_config(args.config)
    print(f"ok: {config.algorithm}, {config.replications} replication(s) x {config.horizon} rounds, "
          f"config {config.config_hash()[:12]}")


def examples_command(args):
    for name in example_names():
        market = named_example(name)
        print(f"{name:<16}{market.n}x{market.m}  {EXAMPLES[name]['description']}")


def stable_command(args):
    market = named_example(args.example) if args.example else load_market(args.market)
    print(render_stable_set(enumerate_stable_matchings(market), alpha_reducibility(market)))


COMMANDS = {
    'run': run_command,
    'validate': validate_command,
    'examples': examples_command,
    'stable': stable_command,
}


def main(argv=None):
    args = create_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        COMMANDS[args.command](args)
    except HintmatchError as e:
        logger.error("%s", e)
        return 1
    except FileNotFoundError as e:
        logger.error("file not found: %s", e.filename)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
