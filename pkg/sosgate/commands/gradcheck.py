import json
import logging

from . import EXIT_OK, EXIT_GRADCHECK_FAILED
from ..gradcheck import (DEFAULT_EPSILON, DEFAULT_SAMPLES, DEFAULT_TOLERANCE,
                         run_gradcheck)


name = 'gradcheck'
help = 'compare autograd gradients with central differences'

logger = logging.getLogger(__name__)


def add_arguments(parser):
    parser.add_argument('--tolerance', type=float, default=DEFAULT_TOLERANCE,
                        help='largest relative error that passes')
    parser.add_argument('--epsilon', type=float, default=DEFAULT_EPSILON,
                        help='relative finite-difference step')
    parser.add_argument('--samples', type=int, default=DEFAULT_SAMPLES,
                        help='coordinates sampled per tensor class')


def overrides(args):
    return {}


def run(args, cfg):
    seed = cfg.seed if cfg.seed is not None else 0
    reports = run_gradcheck(cfg.model, seed, args.epsilon, args.samples)
    worst = max(r.max_relative_error for r in reports)
    passed = worst <= args.tolerance
    print(json.dumps({'preset': cfg.preset, 'seed': seed,
                      'epsilon': args.epsilon, 'tolerance': args.tolerance,
                      'max_relative_error': worst, 'passed': passed,
                      'paths': [r.to_dict() for r in reports]},
                     indent=2, sort_keys=True))
    if not passed:
        logger.error('max relative error %.3g exceeds %.3g', worst,
                     args.tolerance)
        return EXIT_GRADCHECK_FAILED
    return EXIT_OK
