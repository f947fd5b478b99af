import json
import math
import os

import numpy as np
import pytest
import torch

from sosgate.checkpoint import load_checkpoint
from sosgate.common import InvalidInput, TrainingDiverged
from sosgate.config import FrontendConfig, ModelConfig, RunConfig, TrainConfig
from sosgate.fixtures import synthesize_speech, synthesize_noise
from sosgate.manifest import ManifestEntry
from sosgate.model import init_parameters
from sosgate.training import (example_from_entry, epoch_order, epoch_length,
                              schedule_horizon, train, CHECKPOINT_NAME,
                              METRICS_NAME)

FRONTEND = FrontendConfig(clip_seconds=1.0, mel_bins=8)
MODEL = ModelConfig(d_model=16, n_heads=2, n_enc_layers=1, n_dec_layers=1,
                    max_target_len=16, n_mels=8, n_frames=FRONTEND.n_frames)

SPEECH = [('save me', 'saveme'), ('help us', 'helpme'),
          ('hello there', 'others'), ('thank you', 'others')]


def _config(**train):
    recipe = dict(base_lr=1e-3, batch_size=3, epochs=2)
    recipe.update(train)
    return RunConfig(preset='toy', frontend=FRONTEND, model=MODEL,
                     train=TrainConfig(**recipe), seed=0)


def _corpus(seed=0):
    """
    Return (entries, clips): four speech and four noise entries and the
    waveforms behind their paths.
    """
    rng = np.random.default_rng(seed)
    entries = []
    clips = {}
    for i, (text, klass) in enumerate(SPEECH):
        entry = ManifestEntry('speech_%d.wav' % i, transcript=text,
                              cfh_class=klass)
        clips[entry.path], _ = synthesize_speech(text, rng, clip_seconds=1.0,
                                                 background='hum')
        entries.append(entry)
    for scene in MODEL.noise_scenes:
        entry = ManifestEntry('noise_%s.wav' % scene, noise_scene=scene)
        clips[entry.path] = synthesize_noise(scene, rng, clip_seconds=1.0)
        entries.append(entry)
    return entries, clips


ENTRIES, CLIPS = _corpus()


def _examples():
    return [example_from_entry(e, FRONTEND, MODEL, CLIPS.__getitem__)
            for e in ENTRIES]


def test_example_labels():
    examples = _examples()
    assert [ex.noise_label for ex in examples] == [0, 0, 0, 0, 1, 2, 3, 4]
    assert examples[0].mel.shape == (MODEL.n_frames, MODEL.n_mels)
    assert len(examples[0].target_tokens) == len('save me') + 2
    assert examples[4].target_tokens is None


def test_example_rejects_long_transcripts_and_unknown_scenes():
    read = lambda path: CLIPS['speech_0.wav']
    long = ManifestEntry('x.wav', transcript='a' * MODEL.max_target_len)
    with pytest.raises(InvalidInput):
        example_from_entry(long, FRONTEND, MODEL, read)
    fits = ManifestEntry('x.wav', transcript='a' * (MODEL.max_target_len - 1))
    assert example_from_entry(fits, FRONTEND, MODEL, read).target_tokens
    with pytest.raises(InvalidInput):
        example_from_entry(ManifestEntry('x.wav', noise_scene='traffic'),
                           FRONTEND, MODEL, read)


def test_epoch_order_is_a_permutation():
    examples = _examples()
    order = epoch_order(examples, np.random.default_rng(0))
    assert sorted(order) == list(range(len(examples)))


def test_epoch_order_with_noise_fraction():
    examples = _examples()[:6]
    order = epoch_order(examples, np.random.default_rng(1), 0.5)
    assert len(order) == epoch_length(examples, 0.5) == 8
    assert sorted(i for i in order if i < 4) == [0, 1, 2, 3]
    assert sum(1 for i in order if i >= 4) == 4
    assert all(i in (4, 5) for i in order if i >= 4)


def test_epoch_order_needs_both_kinds():
    with pytest.raises(InvalidInput):
        epoch_order(_examples()[:4], np.random.default_rng(0), 0.5)


def test_schedule_horizon():
    assert schedule_horizon(10, TrainConfig(batch_size=4, epochs=3)) == 9
    assert schedule_horizon(10, TrainConfig(batch_size=4, epochs=3,
                                            max_steps=5)) == 5
    assert schedule_horizon(8, TrainConfig(batch_size=4, epochs=1)) == 2


def test_train_needs_a_seed():
    cfg = RunConfig(frontend=FRONTEND, model=MODEL)
    with pytest.raises(InvalidInput):
        train(cfg, ENTRIES, read=CLIPS.__getitem__)


def test_train_writes_checkpoint_and_metrics(tmp_path):
    out = str(tmp_path)
    result = train(_config(), ENTRIES, ENTRIES, out_dir=out,
                   read=CLIPS.__getitem__)
    assert result.steps == 6
    assert result.checkpoint_path == os.path.join(out, CHECKPOINT_NAME)

    with open(os.path.join(out, METRICS_NAME)) as f:
        rows = [json.loads(line) for line in f]
    assert [r['epoch'] for r in rows] == [1, 2]
    assert [r['step'] for r in rows] == [3, 6]
    for row in rows:
        for key in ('l_noise', 'l_seq2seq', 'l_multi', 'lr'):
            assert math.isfinite(row[key])
        assert row['l_multi'] == pytest.approx(row['l_noise']
                                               + row['l_seq2seq'])
        assert 0.0 <= row['eval_accuracy'] <= 1.0
        assert 0.0 <= row['eval_noise_accuracy'] <= 1.0
    assert rows[-1]['lr'] == pytest.approx(0.0, abs=1e-12)

    ckpt = load_checkpoint(result.checkpoint_path)
    assert ckpt.ema is not None
    assert ckpt.meta['epoch'] == 2
    assert ckpt.meta['seed'] == 0
    assert torch.allclose(ckpt.params['noise_head.bias'],
                          result.params['noise_head.bias'])


def test_train_is_deterministic():
    a = train(_config(), ENTRIES, read=CLIPS.__getitem__)
    b = train(_config(), ENTRIES, read=CLIPS.__getitem__)
    for row_a, row_b in zip(a.history, b.history):
        assert row_a['l_multi'] == pytest.approx(row_b['l_multi'], rel=1e-6)
    for name in a.params.names():
        assert torch.allclose(a.params[name], b.params[name], atol=1e-6)


def test_max_steps_stops_early():
    result = train(_config(epochs=5, max_steps=4), ENTRIES,
                   read=CLIPS.__getitem__)
    assert result.steps == 4
    assert len(result.history) == 2


def test_eval_every():
    result = train(_config(epochs=3, eval_every=2), ENTRIES, ENTRIES[:2],
                   read=CLIPS.__getitem__)
    evaluated = ['eval_accuracy' in row for row in result.history]
    assert evaluated == [False, True, True]


def test_single_task_leaves_the_noise_head_alone():
    start = init_parameters(MODEL, 0)
    cfg = _config(noise_weight=0.0, weight_decay=0.0)
    result = train(cfg, ENTRIES, read=CLIPS.__getitem__,
                   params=init_parameters(MODEL, 0))
    for name in ('noise_head.weight', 'noise_head.bias'):
        assert torch.equal(result.params[name], start[name])
    assert not torch.equal(result.params['decoder.proj.weight'],
                           start['decoder.proj.weight'])
    for row in result.history:
        assert row['l_multi'] == pytest.approx(row['l_noise']
                                               + row['l_seq2seq'])


def test_divergence_is_reported(tmp_path):
    start = init_parameters(MODEL, 0)
    start['noise_head.bias'][0] = float('nan')
    with pytest.raises(TrainingDiverged):
        train(_config(), ENTRIES, out_dir=str(tmp_path),
              read=CLIPS.__getitem__, params=start)
    assert not os.path.exists(os.path.join(str(tmp_path), CHECKPOINT_NAME))
