"""
The evaluation module scores detection events against labeled
manifests and measures the noise head on noise-scene manifests.

Two class spaces are reported.  The 4-class space (saveme, helpme,
others, noise) is the gated pipeline's own output space.  The 3-class
space (saveme, helpme, others) is what a model without a gate can say;
it is evaluated with the gate bypassed (tau = 0), and noise on either
side of the comparison is scored as others.
"""
import json
import logging
from dataclasses import dataclass, field

from .audio import read_wav
from .common import InvalidInput, require
from .config import CFH_CLASSES_3, CFH_CLASSES_4, EMERGENCY_CLASSES
from .lexicon import classify_transcript
from .metrics import ConfusionMatrix, accumulate, build_report
from .pipeline import NOISE, detect_batch, gate

logger = logging.getLogger(__name__)

CLASS_SPACES = {
    '3class': CFH_CLASSES_3,
    '4class': CFH_CLASSES_4,
}

OTHERS = 'others'


def class_space_for(tau):
    """
    Return the class space the events of a gate threshold are scored in.
    """
    return '3class' if tau == 0 else '4class'


def true_label(entry, class_space, lexicon):
    """
    Return the true call-for-help label of a manifest entry.

    Noise entries are 'noise' in the 4-class space and 'others' in the
    3-class space.  A speech entry without a cfh_class is labeled by
    classifying its transcript.
    """
    if entry.is_noise:
        return NOISE if class_space == '4class' else OTHERS
    if entry.cfh_class is not None:
        return entry.cfh_class
    return classify_transcript(entry.transcript, lexicon)


def predicted_label(event, class_space):
    """
    Return the label an event counts as in a class space.

    Events for unreadable audio count as 'others'.
    """
    if event.klass is None:
        return OTHERS
    if event.klass == NOISE and class_space == '3class':
        return OTHERS
    return event.klass


def false_alarm_rate(pairs):
    """
    Return the share of non-emergency items predicted as an emergency.

    Arguments:
        pairs: (true, predicted) label pairs

    Returns: a fraction, or None when no item is a non-emergency
    """
    calm = [p for t, p in pairs if t not in EMERGENCY_CLASSES]
    if not calm:
        return None
    return sum(1 for p in calm if p in EMERGENCY_CLASSES) / len(calm)


def evaluate_cfh(events, entries, class_space, lexicon,
                 decoder_invocations=None, tau=None):
    """
    Score detection events against the manifest they were produced from.

    Arguments:
        events: DetectionEvents, one per entry and in the same order
        entries: the ManifestEntry objects
        class_space: '3class' or '4class'
        lexicon: the KeywordLexicon used for unlabeled transcripts
        decoder_invocations: the decoder run count, or None to count the
                             events that invoked the decoder
        tau: the gate threshold the events came from, for the record

    Returns: a MetricsReport
    """
    events = list(events)
    entries = list(entries)
    if class_space not in CLASS_SPACES:
        raise InvalidInput('unknown class space: %s' % (class_space,))
    if len(events) != len(entries):
        raise InvalidInput('%d events for %d manifest entries'
                           % (len(events), len(entries)))
    require(events, 'nothing to evaluate')

    cm = ConfusionMatrix(CLASS_SPACES[class_space])
    pairs = []
    for event, entry in zip(events, entries):
        pair = (true_label(entry, class_space, lexicon),
                predicted_label(event, class_space))
        accumulate(cm, *pair)
        pairs.append(pair)

    if decoder_invocations is None:
        decoder_invocations = sum(1 for e in events if e.decoder_invoked)
    return build_report(cm, class_space, false_alarm_rate(pairs),
                        decoder_invocations, tau)


@dataclass
class NoiseSceneReport:
    """
    Noise-scene accuracy of the noise head on one manifest.

    Arguments:
        domain: the domain tag of the manifest
        correct: entries whose scene was predicted
        total: entries scored
        skipped: entries without a noise scene
        errors: entries whose audio could not be read
        per_scene: scene name -> {'support', 'correct', 'accuracy'}
    """
    domain: str
    correct: int
    total: int
    skipped: int = 0
    errors: int = 0
    per_scene: dict = field(default_factory=dict)

    @property
    def accuracy(self):
        return self.correct / self.total

    def to_dict(self):
        return {'domain': self.domain, 'accuracy': self.accuracy,
                'correct': self.correct, 'total': self.total,
                'skipped': self.skipped, 'errors': self.errors,
                'per_scene': self.per_scene}


def evaluate_noise_scenes(model, entries, domain=None, read=read_wav):
    """
    Measure noise-scene accuracy over a manifest of noise clips.

    The predicted scene is the argmax over the scene logits only, so a
    clip the gate would call speech still gets a scene.

    Arguments:
        model: the model (see sosgate.pipeline)
        entries: ManifestEntry objects
        domain: the report's domain tag; by default the entries' own
        read: the function turning a path into a Waveform

    Returns: a NoiseSceneReport
    """
    scenes = list(model.noise_scenes)
    tally = {s: [0, 0] for s in scenes}
    domains = set()
    skipped = errors = 0
    for entry in entries:
        if not entry.is_noise:
            logger.warning('%s has no noise scene, skipped', entry.audio)
            skipped += 1
            continue
        if entry.noise_scene not in tally:
            raise InvalidInput('unknown noise scene %r in %s'
                               % (entry.noise_scene, entry.audio))
        try:
            w = read(entry.path)
        except InvalidInput as e:
            logger.warning('skipping %s: %s', entry.path, e)
            errors += 1
            continue
        domains.add(entry.domain)
        states = model.encode(model.featurize(w))
        # The threshold does not matter here; only the scene argmax is used.
        predicted = gate(model.noise_logits(states), 0.5).scene_argmax
        counts = tally[entry.noise_scene]
        counts[0] += 1
        counts[1] += int(scenes[predicted - 1] == entry.noise_scene)

    total = sum(c[0] for c in tally.values())
    if total == 0:
        raise InvalidInput('no noise-scene entries to evaluate')
    if domain is None:
        domain = '+'.join(sorted(domains))
    per_scene = {s: {'support': n, 'correct': k,
                     'accuracy': k / n if n else 0.0}
                 for s, (n, k) in tally.items()}
    return NoiseSceneReport(domain, sum(c[1] for c in tally.values()),
                            total, skipped, errors, per_scene)


def write_noise_reports(path, reports):
    """
    Write noise-scene reports as a JSON list, one object per manifest.
    """
    with open(path, 'w') as f:
        json.dump([r.to_dict() for r in reports], f, indent=2,
                  sort_keys=True)
        f.write('\n')


def sweep(entries, model, lexicon, taus, class_space='4class',
          read=read_wav):
    """
    Evaluate the pipeline once per gate threshold.

    Arguments:
        entries: ManifestEntry objects
        model: the model
        lexicon: a KeywordLexicon
        taus: the thresholds to try
        class_space: the space every threshold is scored in
        read: the function turning a path into a Waveform

    Returns: a list of dictionaries with the keys tau, accuracy,
             macro_f1, false_alarm_rate, decoder_invocations and total
    """
    rows = []
    for tau in taus:
        result = detect_batch(entries, model, lexicon, tau, read=read)
        report = evaluate_cfh(result.events, entries, class_space, lexicon,
                              result.decoder_invocations, tau)
        logger.info('tau %.3f: accuracy %.4f, macro F1 %.4f, '
                    '%d decoder runs', tau, report.accuracy,
                    report.macro_f1, report.decoder_invocations)
        rows.append({'tau': tau, 'accuracy': report.accuracy,
                     'macro_f1': report.macro_f1,
                     'false_alarm_rate': report.false_alarm_rate,
                     'decoder_invocations': report.decoder_invocations,
                     'total': report.total})
    return rows


def write_sweep(path, rows):
    with open(path, 'w') as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True))
            f.write('\n')
