from collections import namedtuple

import numpy as np
import pytest

from sosgate.common import InvalidInput
from sosgate.evaluation import (class_space_for, true_label, predicted_label,
                                false_alarm_rate, evaluate_cfh,
                                evaluate_noise_scenes, sweep)
from sosgate.lexicon import KeywordLexicon
from sosgate.manifest import ManifestEntry
from sosgate.pipeline import DetectionEvent

LEXICON = KeywordLexicon({'saveme': ['save me'], 'helpme': ['help me']})
SCENES = ('hum', 'rumble', 'chatter', 'hiss')

Clip = namedtuple('Clip', ['logits', 'text'])


class StubModel(object):
    noise_scenes = SCENES

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


def _speech(text, cfh_class=None):
    return ManifestEntry(text.replace(' ', '_') + '.wav', transcript=text,
                         cfh_class=cfh_class)


def _noise(scene, name=None, domain='in-domain'):
    return ManifestEntry((name or scene) + '.wav', noise_scene=scene,
                         domain=domain)


def _event(klass, invoked=True):
    return DetectionEvent(klass, '', 0.5, invoked)


ENTRIES = [_speech('save me now', 'saveme'), _speech('help me', 'helpme'),
           _speech('good morning', 'others'), _noise('hum')]


def test_class_space_for():
    assert class_space_for(0) == '3class'
    assert class_space_for(0.0) == '3class'
    assert class_space_for(0.5) == '4class'


def test_true_label():
    assert true_label(_noise('hiss'), '4class', LEXICON) == 'noise'
    assert true_label(_noise('hiss'), '3class', LEXICON) == 'others'
    assert true_label(_speech('please help me'), '4class',
                      LEXICON) == 'helpme'
    assert true_label(_speech('help me', 'others'), '4class',
                      LEXICON) == 'others'


def test_predicted_label():
    assert predicted_label(_event('noise', False), '3class') == 'others'
    assert predicted_label(_event('noise', False), '4class') == 'noise'
    assert predicted_label(DetectionEvent(None, '', 0.0, False), '4class') \
           == 'others'


def test_perfect_predictions():
    events = [_event('saveme'), _event('helpme'), _event('others'),
              _event('noise', False)]
    report = evaluate_cfh(events, ENTRIES, '4class', LEXICON)
    assert report.accuracy == 1.0
    assert report.macro_f1 == 1.0
    assert report.false_alarm_rate == 0.0
    assert report.decoder_invocations == 3


def test_everything_predicted_others():
    events = [_event('others')] * 4
    report = evaluate_cfh(events, ENTRIES, '4class', LEXICON)
    assert report.accuracy == 0.25
    # only others has non-zero F1: precision 1/4, recall 1
    assert report.macro_f1 == pytest.approx((2 * 0.25 / 1.25) / 4)


def test_three_class_folds_noise_into_others():
    events = [_event('saveme'), _event('helpme'), _event('others'),
              _event('others')]
    report = evaluate_cfh(events, ENTRIES, '3class', LEXICON, tau=0.0)
    assert report.labels == ['saveme', 'helpme', 'others']
    assert report.accuracy == 1.0
    assert report.confusion.counts[2][2] == 2
    assert report.tau == 0.0


def test_error_events_count_as_others():
    events = [DetectionEvent(None, '', 0.0, False, 'x', 'bad')] * 4
    report = evaluate_cfh(events, ENTRIES, '4class', LEXICON)
    assert report.confusion.col_sum(2) == 4


def test_length_mismatch():
    with pytest.raises(InvalidInput):
        evaluate_cfh([_event('others')], ENTRIES, '4class', LEXICON)


def test_unknown_class_space():
    with pytest.raises(InvalidInput):
        evaluate_cfh([_event('others')], ENTRIES[:1], '5class', LEXICON)


def test_empty_input():
    with pytest.raises(InvalidInput):
        evaluate_cfh([], [], '4class', LEXICON)


def test_false_alarm_rate():
    pairs = [('others', 'saveme'), ('others', 'others'), ('noise', 'helpme'),
             ('noise', 'noise'), ('saveme', 'others')]
    assert false_alarm_rate(pairs) == 0.5
    assert false_alarm_rate([('saveme', 'saveme')]) is None


def _scene_clips(predicted_offset):
    entries = []
    clips = {}
    for i, scene in enumerate(SCENES):
        entry = _noise(scene, '%s_%d' % (scene, i))
        logits = [-10.0] * 5
        logits[1 + (i + predicted_offset) % 4] = 10.0
        clips[entry.path] = Clip(logits, '')
        entries.append(entry)
    return entries, clips


def test_noise_scenes_all_right():
    entries, clips = _scene_clips(0)
    report = evaluate_noise_scenes(StubModel(), entries,
                                   read=clips.__getitem__)
    assert report.accuracy == 1.0
    assert report.total == 4
    assert report.domain == 'in-domain'
    assert report.per_scene['hum'] == {'support': 1, 'correct': 1,
                                       'accuracy': 1.0}


def test_noise_scenes_all_wrong_and_skips_speech():
    entries, clips = _scene_clips(1)
    report = evaluate_noise_scenes(StubModel(), entries + [ENTRIES[0]],
                                   domain='out-of-domain',
                                   read=clips.__getitem__)
    assert report.accuracy == 0.0
    assert report.skipped == 1
    assert report.domain == 'out-of-domain'
    assert report.to_dict()['correct'] == 0


def test_noise_scenes_use_the_argmax_even_when_speech_wins():
    entry = _noise('rumble')
    clips = {entry.path: Clip([50.0, 0.0, 3.0, 1.0, 2.0], '')}
    report = evaluate_noise_scenes(StubModel(), [entry],
                                   read=clips.__getitem__)
    assert report.accuracy == 1.0


def test_noise_scenes_unknown_scene():
    with pytest.raises(InvalidInput):
        evaluate_noise_scenes(StubModel(), [_noise('traffic')],
                              read=lambda path: None)


def test_noise_scenes_nothing_to_score():
    with pytest.raises(InvalidInput):
        evaluate_noise_scenes(StubModel(), [ENTRIES[0]],
                              read=lambda path: None)


def test_noise_scenes_count_read_errors():
    entries, clips = _scene_clips(0)

    def read(path):
        if path.startswith('hiss'):
            raise InvalidInput('cannot read WAV %s' % path)
        return clips[path]

    report = evaluate_noise_scenes(StubModel(), entries, read=read)
    assert report.errors == 1
    assert report.total == 3


def test_sweep():
    entries = [_speech('save me', 'saveme'), _noise('hum'),
               _speech('hello there', 'others')]
    clips = {entries[0].path: Clip([0.0, 0.0, -5.0, -5.0, -5.0], 'save me'),
             entries[1].path: Clip([-5.0, 5.0, -5.0, -5.0, -5.0], 'hum hum'),
             entries[2].path: Clip([5.0, -5.0, -5.0, -5.0, -5.0],
                                   'hello there')}
    rows = sweep(entries, StubModel(), LEXICON, [0.0, 0.45, 0.9],
                 read=clips.__getitem__)
    assert [r['tau'] for r in rows] == [0.0, 0.45, 0.9]
    assert [r['decoder_invocations'] for r in rows] == [3, 2, 1]
    assert rows[1]['accuracy'] == 1.0
    # at 0.9 the save me clip is gated out as noise
    assert rows[2]['accuracy'] == pytest.approx(2 / 3)
    assert all(r['total'] == 3 for r in rows)
