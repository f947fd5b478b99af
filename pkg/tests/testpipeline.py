from collections import namedtuple

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sosgate.common import InvalidInput, softmax
from sosgate.lexicon import KeywordLexicon
from sosgate.pipeline import gate, detect, detect_batch, DetectionEvent

LEXICON = KeywordLexicon({'saveme': ['save me'], 'helpme': ['help me']})

Clip = namedtuple('Clip', ['logits', 'text'])


class StubModel(object):
    """
    Stands in for CallForHelpModel: a clip is its own features and
    encoder states, and carries its logits and transcript.
    """
    noise_scenes = ('hum', 'rumble', 'chatter', 'hiss')

    def __init__(self):
        self.decoder_calls = 0

    def featurize(self, clip):
        return clip

    def encode(self, mel):
        return mel

    def noise_logits(self, states):
        return np.asarray(states.logits, dtype=np.float64)

    def transcribe(self, states, max_len=None):
        self.decoder_calls += 1
        return [], states.text


def _speech(text):
    return Clip([30.0, -30.0, -30.0, -30.0, -30.0], text)


def _noise(scene=1):
    logits = [-30.0] * 5
    logits[scene] = 30.0
    return Clip(logits, 'this transcript must never be read')


def test_gate_saturated_speech():
    decision = gate([30.0, -30.0, -30.0], 0.5)
    assert decision.verdict == 'speech'
    assert decision.speech_posterior == pytest.approx(1.0)


def test_gate_uniform_noise():
    decision = gate(np.zeros(14), 0.5)
    assert decision.speech_posterior == pytest.approx(1 / 14)
    assert decision.verdict == 'noise'


def test_gate_scene_argmax():
    assert gate([5.0, 0.0, 2.0, 1.0], 0.5).scene_argmax == 2


def test_gate_matches_softmax():
    rng = np.random.default_rng(0)
    for _ in range(20):
        logits = rng.standard_normal(5) * 3
        posterior = gate(logits, 0.5).speech_posterior
        e = np.exp(logits - logits.max())
        assert abs(posterior - e[0] / e.sum()) < 1e-10


def test_gate_threshold_zero_passes_everything():
    assert gate([-100.0, 100.0], 0.0).verdict == 'speech'


def test_gate_bad_threshold():
    with pytest.raises(InvalidInput):
        gate([0.0, 0.0], 1.5)


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=6),
       st.floats(0, 1), st.floats(0, 1))
def test_raising_tau_never_turns_noise_into_speech(logits, a, b):
    low, high = min(a, b), max(a, b)
    if gate(logits, low).verdict == 'noise':
        assert gate(logits, high).verdict == 'noise'
    assert gate(logits, low).speech_posterior == \
           pytest.approx(softmax(logits)[0])


def test_detect_noise_skips_decoder():
    model = StubModel()
    event = detect(_noise(), model, LEXICON, 0.5)
    assert event.klass == 'noise'
    assert event.transcript == ''
    assert not event.decoder_invoked
    assert model.decoder_calls == 0


def test_detect_speech():
    model = StubModel()
    event = detect(_speech('please save me'), model, LEXICON, 0.5)
    assert event.klass == 'saveme'
    assert event.decoder_invoked
    assert model.decoder_calls == 1


def test_detect_empty_transcript_is_others():
    event = detect(_speech(''), StubModel(), LEXICON, 0.5)
    assert event.klass == 'others'
    assert event.transcript == ''


def test_detect_batch_counts_decoder_runs():
    clips = {'a': _speech('help me'), 'b': _noise(2), 'c': _speech('hello'),
             'd': _noise(4)}
    model = StubModel()
    result = detect_batch(['a', 'b', 'c', 'd'], model, LEXICON, 0.5,
                          read=clips.__getitem__)
    assert [e.klass for e in result.events] == ['helpme', 'noise', 'others',
                                                'noise']
    assert [e.audio for e in result.events] == ['a', 'b', 'c', 'd']
    assert result.decoder_invocations == 2
    assert result.speech_verdicts == 2
    assert result.total == 4


def test_detect_batch_all_noise():
    clips = {str(i): _noise(1 + i % 4) for i in range(6)}
    model = StubModel()
    result = detect_batch(sorted(clips), model, LEXICON, 0.5,
                          read=clips.__getitem__)
    assert result.decoder_invocations == 0
    assert model.decoder_calls == 0


def test_detect_batch_tau_zero_decodes_everything():
    clips = {str(i): _noise(1 + i % 4) for i in range(6)}
    result = detect_batch(sorted(clips), StubModel(), LEXICON, 0.0,
                          read=clips.__getitem__)
    assert result.decoder_invocations == 6
    assert all(e.klass != 'noise' for e in result.events)


def test_detect_batch_recount():
    rng = np.random.default_rng(4)
    clips = {}
    for i in range(40):
        clips['%02d' % i] = Clip(rng.standard_normal(5) * 2, 'help me')
    model = StubModel()
    result = detect_batch(sorted(clips), model, LEXICON, 0.5,
                          read=clips.__getitem__)
    recount = sum(1 for c in clips.values()
                  if softmax(c.logits)[0] >= 0.5)
    assert result.decoder_invocations == recount
    assert all(not e.decoder_invoked for e in result.events
               if e.klass == 'noise')


def test_detect_batch_keeps_going_after_bad_audio():
    def read(path):
        if path == 'broken':
            raise InvalidInput('cannot read WAV broken')
        return _speech('save me')

    result = detect_batch(['ok', 'broken', 'ok'], StubModel(), LEXICON, 0.5,
                          read=read)
    assert result.errors == 1
    assert result.events[1].klass is None
    assert 'cannot read' in result.events[1].error
    assert [e.klass for e in result.events] == ['saveme', None, 'saveme']


def test_event_json():
    event = DetectionEvent('saveme', 'save me', 0.9, True, 'a.wav')
    assert event.is_emergency
    assert '"klass": "saveme"' in event.to_json()
    assert 'error' not in event.to_dict()
    assert not DetectionEvent('noise', '', 0.1, False).is_emergency
