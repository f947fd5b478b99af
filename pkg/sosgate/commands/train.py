import logging

from . import EXIT_OK
from ..common import require
from ..manifest import read_manifest
from ..training import train


name = 'train'
help = 'train the model with the multitask objective'

logger = logging.getLogger(__name__)


def add_arguments(parser):
    parser.add_argument('--train-manifest', help='training manifest (JSONL)')
    parser.add_argument('--eval-manifest',
                        help='held-out manifest evaluated during training')
    parser.add_argument('--single-task', action='store_true',
                        help='drop the noise loss (noise_weight 0)')
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--max-steps', type=int)
    parser.add_argument('--batch-size', type=int)
    parser.add_argument('--lr', type=float, help='peak learning rate')


def overrides(args):
    recipe = {}
    if args.single_task:
        recipe['noise_weight'] = 0.0
    for flag, key in (('epochs', 'epochs'), ('max_steps', 'max_steps'),
                      ('batch_size', 'batch_size'), ('lr', 'base_lr')):
        if getattr(args, flag) is not None:
            recipe[key] = getattr(args, flag)
    result = {'train': recipe} if recipe else {}
    if args.train_manifest is not None:
        result['train_manifest'] = args.train_manifest
    if args.eval_manifest is not None:
        result['test_manifest'] = args.eval_manifest
    return result


def run(args, cfg):
    require(cfg.train_manifest, 'train needs --train-manifest')
    entries = read_manifest(cfg.train_manifest)
    eval_entries = read_manifest(cfg.test_manifest) \
        if cfg.test_manifest else None
    logger.info('training the %s preset for %d epochs (noise weight %g)',
                cfg.preset, cfg.train.epochs, cfg.train.noise_weight)
    result = train(cfg, entries, eval_entries, out_dir=cfg.out_dir)
    logger.info('finished after %d steps; checkpoint %s', result.steps,
                result.checkpoint_path)
    print(result.checkpoint_path)
    return EXIT_OK
