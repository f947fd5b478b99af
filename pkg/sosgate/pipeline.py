"""
The pipeline module runs call-for-help detection with a noise gate.

For each utterance: featurize, encode, pool over time, apply the noise
head and gate on the speech posterior.  A noise verdict ends processing
there and the decoder never runs.  A speech verdict is greedy-decoded
and the transcript is mapped to saveme, helpme or others.

The model argument of these functions is anything with the methods of
sosgate.model.CallForHelpModel: featurize, encode, noise_logits and
transcribe, plus a decoder_calls counter.
"""
import json
import logging
from dataclasses import dataclass, asdict

import numpy as np

from .audio import read_wav
from .common import InvalidInput, softmax, require
from .config import SPEECH_CLASS, EMERGENCY_CLASSES
from .lexicon import classify_transcript

logger = logging.getLogger(__name__)

SPEECH = 'speech'
NOISE = 'noise'


@dataclass(frozen=True)
class GateDecision:
    """
    The outcome of the noise gate.

    Arguments:
        verdict: 'speech' or 'noise'
        speech_posterior: softmax probability of the speech class
        scene_argmax: the most likely noise scene index, in 1..K
    """
    verdict: str
    speech_posterior: float
    scene_argmax: int


@dataclass(frozen=True)
class DetectionEvent:
    """
    The result of running one utterance through the pipeline.

    klass is saveme, helpme, others or noise.  An event for an
    utterance that could not be read has klass None and an error.
    """
    klass: str
    transcript: str
    speech_posterior: float
    decoder_invoked: bool
    audio: str = None
    error: str = None

    @property
    def is_emergency(self):
        return self.klass in EMERGENCY_CLASSES

    def to_dict(self):
        record = asdict(self)
        if record['audio'] is None:
            del record['audio']
        if record['error'] is None:
            del record['error']
        return record

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def gate(noise_logits, threshold):
    """
    Decide whether noise-head logits describe speech.

    Arguments:
        noise_logits: K+1 logits, index 0 being speech
        threshold: the speech posterior needed to pass, in [0, 1];
                   0 lets everything through

    Returns: a GateDecision
    """
    require(0.0 <= threshold <= 1.0, 'gate threshold must be in [0, 1]')
    logits = np.asarray(noise_logits, dtype=np.float64)
    require(logits.ndim == 1 and len(logits) >= 2,
            'gate needs a vector of at least two logits')
    posterior = float(softmax(logits)[SPEECH_CLASS])
    scene = 1 + int(np.argmax(logits[1:]))
    verdict = SPEECH if posterior >= threshold else NOISE
    return GateDecision(verdict, posterior, scene)


def detect_features(mel, model, lexicon, threshold):
    """
    Run the pipeline from a log-mel spectrogram onwards.

    Arguments:
        mel: a MelSpectrogram (or frames) shaped for the model
        model: the model
        lexicon: a KeywordLexicon
        threshold: the gate threshold

    Returns: a DetectionEvent
    """
    states = model.encode(mel)
    decision = gate(model.noise_logits(states), threshold)
    if decision.verdict == NOISE:
        return DetectionEvent(NOISE, '', decision.speech_posterior, False)
    _, text = model.transcribe(states)
    return DetectionEvent(classify_transcript(text, lexicon), text,
                          decision.speech_posterior, True)


def detect(w, model, lexicon, threshold):
    """
    Detect a call for help in a waveform.

    Arguments:
        w: a Waveform at any sample rate
        model: the model
        lexicon: a KeywordLexicon
        threshold: the gate threshold

    Returns: a DetectionEvent
    """
    return detect_features(model.featurize(w), model, lexicon, threshold)


@dataclass
class BatchResult:
    """
    The events of a detect_batch run and its counters.

    decoder_invocations counts the decoder runs observed on the model
    during the batch; speech_verdicts counts the events that passed the
    gate.  The two are always equal.
    """
    events: list
    decoder_invocations: int
    speech_verdicts: int
    errors: int

    @property
    def total(self):
        return len(self.events)


def detect_batch(entries, model, lexicon, threshold, read=read_wav):
    """
    Run detection over manifest entries (or plain paths) in order.

    An entry whose audio cannot be read yields an error event and the
    run continues.

    Arguments:
        entries: ManifestEntry objects or audio paths
        model: the model
        lexicon: a KeywordLexicon
        threshold: the gate threshold
        read: the function turning a path into a Waveform

    Returns: a BatchResult
    """
    events = []
    errors = 0
    calls_before = model.decoder_calls
    for entry in entries:
        path = getattr(entry, 'path', entry)
        try:
            event = detect(read(path), model, lexicon, threshold)
        except InvalidInput as e:
            logger.warning('skipping %s: %s', path, e)
            errors += 1
            events.append(DetectionEvent(None, '', 0.0, False, path, str(e)))
            continue
        events.append(DetectionEvent(event.klass, event.transcript,
                                     event.speech_posterior,
                                     event.decoder_invoked, path))
    invocations = model.decoder_calls - calls_before
    speech = sum(1 for e in events if e.decoder_invoked)
    assert invocations == speech, \
           'decoder ran %d times for %d speech verdicts' % (invocations,
                                                           speech)
    return BatchResult(events, invocations, speech, errors)
