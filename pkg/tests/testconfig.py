import json

import pytest

from sosgate.common import InvalidInput
from sosgate.config import (FrontendConfig, ModelConfig, TrainConfig,
                            RunConfig, preset, apply_overrides,
                            load_run_config)


def test_presets_are_complete():
    toy = preset('toy')
    assert toy.frontend.clip_seconds == 1.5
    assert toy.model.n_frames == toy.frontend.n_frames == 150
    assert toy.model.d_model == 64
    assert toy.train.eval_every == 1
    paper = preset('paper')
    assert paper.model.d_model == 384
    assert paper.model.n_frames == 3000
    assert paper.train.base_lr == 1e-4
    assert paper.train.batch_size == 32
    assert paper.train.epochs == 10
    assert paper.train.ema_coefficient == 0.5
    assert paper.tau == 0.5
    assert paper.train.eval_every == 1


def test_unknown_preset():
    with pytest.raises(InvalidInput):
        preset('huge')


def test_validation():
    with pytest.raises(InvalidInput):
        FrontendConfig(hop=0)
    with pytest.raises(InvalidInput):
        ModelConfig(d_model=30, n_heads=4)
    with pytest.raises(InvalidInput):
        ModelConfig(noise_scenes=())
    with pytest.raises(InvalidInput):
        TrainConfig(noise_fraction=1.0)
    with pytest.raises(InvalidInput):
        RunConfig(tau=1.5)


def test_model_follows_frontend():
    cfg = apply_overrides(preset('toy'), {'frontend': {'clip_seconds': 2.0}})
    assert cfg.model.n_frames == 200


def test_unknown_keys():
    with pytest.raises(InvalidInput):
        apply_overrides(preset('toy'), {'train': {'speed': 3}})
    with pytest.raises(InvalidInput):
        apply_overrides(preset('toy'), {'colour': 'red'})


def test_load_order(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'preset': 'toy', 'tau': 0.7,
                                'train': {'epochs': 3, 'batch_size': 8}}))
    cfg = load_run_config(None, str(path), {'train': {'epochs': 5}})
    assert cfg.preset == 'toy'
    assert cfg.tau == 0.7
    assert cfg.train.epochs == 5
    assert cfg.train.batch_size == 8


def test_bad_config_file(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text('[1, 2]')
    with pytest.raises(InvalidInput):
        load_run_config('toy', str(path))
    with pytest.raises(InvalidInput):
        load_run_config('toy', str(tmp_path / 'missing.json'))


def test_to_dict_is_json():
    json.dumps(preset('toy').to_dict())
