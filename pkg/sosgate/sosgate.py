#!/usr/bin/env python
"""
The sosgate command line: parses flags, sets up logging, resolves the
run configuration and dispatches to a command module.
"""
import argparse
import logging
import sys

from .common import InvalidInput, TrainingDiverged
from .config import PRESETS, load_run_config
from . import commands

logger = logging.getLogger('sosgate')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def build_parser():
    """
    Create the argument parser with one subcommand per command module.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON config file')
    common.add_argument('--preset', choices=sorted(PRESETS),
                        help='configuration preset (default: toy)')
    common.add_argument('--seed', type=int)
    common.add_argument('--out', help='output directory')
    common.add_argument('--tau', type=float,
                        help='gate threshold on the speech posterior')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')

    parser = argparse.ArgumentParser(
        prog='sosgate',
        description='Noise-gated call-for-help detection.')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True
    for command in commands.commands_list:
        p = sub.add_parser(command.name, help=command.help,
                           parents=[common])
        command.add_arguments(p)
        p.set_defaults(command_module=command)
    return parser


def _overrides(args):
    overrides = args.command_module.overrides(args)
    for flag, key in (('seed', 'seed'), ('out', 'out_dir'), ('tau', 'tau')):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    return overrides


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)

    try:
        cfg = load_run_config(args.preset, args.config, _overrides(args))
        logger.debug('resolved config: %s', cfg.to_dict())
        return args.command_module.run(args, cfg)
    except TrainingDiverged as e:
        logger.error('training diverged: %s', e)
        return commands.EXIT_DIVERGED
    except InvalidInput as e:
        logger.error('%s', e)
        return commands.EXIT_ERROR
    except OSError as e:
        logger.error('%s', e)
        return commands.EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
