import logging

from . import EXIT_OK, EXIT_ERROR, EXIT_EMERGENCY
from ..checkpoint import load_model
from ..lexicon import load_lexicon
from ..pipeline import detect_batch


name = 'detect'
help = 'detect calls for help in WAV files (exit 2 on an emergency)'

logger = logging.getLogger(__name__)


def add_arguments(parser):
    parser.add_argument('--checkpoint', required=True)
    parser.add_argument('--lexicon', help='lexicon JSON file')
    parser.add_argument('--live', action='store_true',
                        help='use the live weights instead of the EMA')
    parser.add_argument('audio', nargs='+',
                        help="WAV files, or '-' for stdin")


def overrides(args):
    return {'lexicon': args.lexicon} if args.lexicon is not None else {}


def run(args, cfg):
    model = load_model(args.checkpoint, use_ema=not args.live)
    lexicon = load_lexicon(cfg.lexicon)
    result = detect_batch(args.audio, model, lexicon, cfg.tau)
    for event in result.events:
        print(event.to_json())
    if result.errors:
        return EXIT_ERROR
    if any(e.is_emergency for e in result.events):
        return EXIT_EMERGENCY
    return EXIT_OK
