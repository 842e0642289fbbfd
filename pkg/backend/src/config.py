import os

# Default output directory can be redirected without touching configs
OUTPUT_DIR_ENV = 'HINTMATCH_OUTPUT_DIR'


class SimulationConfig:
    # Market generation
    DEFAULT_MIN_GAP = 0.2
    DEFAULT_REWARD_KIND = 'bernoulli'
    DEFAULT_SIGMA = 0.1
    REWARD_KINDS = {
        'bernoulli': 'Bernoulli(mean)',
        'gaussian': 'Gaussian truncated to [0, 1]',
        'point': 'Point mass at the mean'
    }

    # Named examples: ordinal lists embedded on an even grid
    EXAMPLE_TOP_MEAN = 0.9
    EXAMPLE_BOTTOM_MEAN = 0.1

    # Stable-set enumeration guard (factorial search)
    MAX_ENUMERATION_AGENTS = 8

    # Interview budgets
    INTERVIEW_BUDGET = 2
    EXTENDED_INTERVIEW_BUDGET = 3

    # Algorithms
    ALGORITHMS = {
        'cia': 'Centralized interview allocation',
        'drr': 'Coordinated decentralized learning (vacancy feedback)',
        'ancdrr': 'Coordination-free decentralized learning (hiring-change feedback)',
        'eancdrr': 'Extended coordination-free learning (k = 3, set applications)',
        'allprobe': 'AllProbe single-agent hinted bandit',
        'eap': 'Extended AllProbe (i-th best arm)',
        'apem': 'AllProbe with empirical means'
    }
    MARKET_ALGORITHMS = ('cia', 'drr', 'ancdrr', 'eancdrr')
    HINTED_ALGORITHMS = ('allprobe', 'eap', 'apem')
    FIRM_MODES = ('certain', 'uncertain')

    # Hinted bandits
    EPSILON = 0.1
    TARGET_RANK = 1

    # Metrics
    PLATEAU_THRESHOLD = 1.10
    ZERO_REGRET_TOLERANCE = 1e-12

    # Harness
    DEFAULT_HORIZON = 10000
    DEFAULT_REPLICATIONS = 1
    DEFAULT_BASE_SEED = 0
    DEFAULT_STRIDE = 1
    DEFAULT_WORKERS = 1
    DEFAULT_OUTPUT_DIR = 'results'
    CSV_FLOAT_FORMAT = '%.10g'

    @staticmethod
    def output_dir(flag=None, configured=None):
        """Resolve the output directory: flag, then config, then env, then default."""
        if flag:
            return flag
        if configured:
            return configured
        return os.environ.get(OUTPUT_DIR_ENV, SimulationConfig.DEFAULT_OUTPUT_DIR)
