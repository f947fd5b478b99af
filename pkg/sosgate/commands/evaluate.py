import logging
import os

from . import EXIT_OK
from ..checkpoint import load_model
from ..common import InvalidInput, require
from ..evaluation import (class_space_for, evaluate_cfh,
                          evaluate_noise_scenes, sweep, write_noise_reports,
                          write_sweep)
from ..lexicon import load_lexicon
from ..manifest import read_manifest
from ..metrics import format_table, write_confusion_csv, write_report_json
from ..pipeline import detect_batch


name = 'eval'
help = 'score a checkpoint on call-for-help and noise-scene manifests'

logger = logging.getLogger(__name__)


def _taus(text):
    try:
        taus = [float(t) for t in text.split(',') if t.strip()]
    except ValueError:
        raise InvalidInput('--sweep takes comma-separated thresholds')
    require(taus, '--sweep needs at least one threshold')
    return taus


def add_arguments(parser):
    parser.add_argument('--checkpoint', required=True)
    parser.add_argument('--manifest', help='call-for-help test manifest')
    parser.add_argument('--noise-manifest', action='append',
                        help='noise-scene manifest (repeatable)')
    parser.add_argument('--lexicon', help='lexicon JSON file')
    parser.add_argument('--sweep', type=_taus,
                        help='thresholds to sweep, e.g., 0,0.25,0.5,0.9')
    parser.add_argument('--live', action='store_true',
                        help='use the live weights instead of the EMA')


def overrides(args):
    result = {}
    if args.manifest is not None:
        result['test_manifest'] = args.manifest
    if args.noise_manifest:
        result['noise_manifests'] = tuple(args.noise_manifest)
    if args.lexicon is not None:
        result['lexicon'] = args.lexicon
    return result


def _write(out_dir, suffix, report):
    write_report_json(os.path.join(out_dir, 'report%s.json' % suffix), report)
    write_confusion_csv(os.path.join(out_dir, 'confusion%s.csv' % suffix),
                        report.confusion)


def run(args, cfg):
    require(cfg.test_manifest or cfg.noise_manifests,
            'eval needs --manifest or --noise-manifest')
    model = load_model(args.checkpoint, use_ema=not args.live)
    lexicon = load_lexicon(cfg.lexicon)
    os.makedirs(cfg.out_dir, exist_ok=True)

    if cfg.test_manifest:
        entries = read_manifest(cfg.test_manifest)
        # The gate-bypassed run gives the 3-class report; a positive tau
        # adds the gated 4-class one.
        taus = [0.0] if cfg.tau == 0 else [0.0, cfg.tau]
        for tau in taus:
            space = class_space_for(tau)
            result = detect_batch(entries, model, lexicon, tau)
            report = evaluate_cfh(result.events, entries, space, lexicon,
                                  result.decoder_invocations, tau)
            _write(cfg.out_dir, '_' + space, report)
            if tau == cfg.tau:
                _write(cfg.out_dir, '', report)
            print(format_table(report))
            print()
        if args.sweep:
            rows = sweep(entries, model, lexicon, args.sweep)
            write_sweep(os.path.join(cfg.out_dir, 'sweep.jsonl'), rows)

    reports = []
    for path in cfg.noise_manifests:
        report = evaluate_noise_scenes(model, read_manifest(path))
        print('noise scenes (%s): accuracy %.4f over %d clips'
              % (report.domain, report.accuracy, report.total))
        reports.append(report)
    if reports:
        write_noise_reports(os.path.join(cfg.out_dir, 'noise_scenes.json'),
                            reports)
    return EXIT_OK
