import logging

from . import EXIT_OK
from ..common import require
from ..fixtures import FixtureSizes, make_fixtures


name = 'make-fixtures'
help = 'generate a synthetic speech and noise corpus'

logger = logging.getLogger(__name__)


def add_arguments(parser):
    defaults = FixtureSizes()
    parser.add_argument('--train-speech', type=int,
                        default=defaults.train_speech)
    parser.add_argument('--train-noise', type=int,
                        default=defaults.train_noise)
    parser.add_argument('--test-speech', type=int,
                        default=defaults.test_speech)
    parser.add_argument('--test-noise', type=int,
                        default=defaults.test_noise)
    parser.add_argument('--ood-noise', type=int, default=defaults.ood_noise,
                        help='out-of-domain noise clips')


def overrides(args):
    return {}


def run(args, cfg):
    require(cfg.seed is not None, 'make-fixtures needs --seed')
    sizes = FixtureSizes(args.train_speech, args.train_noise,
                         args.test_speech, args.test_noise, args.ood_noise)
    for field, count in vars(sizes).items():
        require(count >= 0, '%s must be >= 0' % (field,))
    paths = make_fixtures(cfg.out_dir, cfg.seed, sizes,
                          scenes=cfg.model.noise_scenes,
                          clip_seconds=cfg.frontend.clip_seconds)
    for key in sorted(paths):
        print('%s\t%s' % (key, paths[key]))
    return EXIT_OK
