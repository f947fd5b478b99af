"""
The training module fits the model to a manifest with the multitask
objective.

Each optimizer step draws a batch from a seeded shuffle of the merged
speech and noise items, computes the multitask loss, takes the
gradient with autograd and applies AdamW under the cosine schedule.
The EMA shadow follows every step and is what gets evaluated.  A
checkpoint of both weight sets is written after every epoch, so a run
that diverges leaves its last good epoch behind.
"""
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .audio import read_wav, featurize
from .checkpoint import save_checkpoint
from .common import InvalidInput, TrainingDiverged, require
from .config import SPEECH_CLASS
from .evaluation import evaluate_cfh
from .lexicon import load_lexicon
from .losses import TrainingExample, Batch, multitask_loss
from .model import CallForHelpModel, init_parameters, count_parameters
from .optim import (cosine_lr, new_optimizer_state, adamw_step,
                    new_ema_state, ema_update)
from .pipeline import detect_features
from .tokenizer import Tokenizer

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.sosg'
METRICS_NAME = 'metrics.jsonl'

# Batches of this many examples are used when scoring held-out data.
EVAL_CHUNK = 64


def example_from_entry(entry, frontend, model_cfg, read=read_wav):
    """
    Featurize one manifest entry into a TrainingExample.

    Arguments:
        entry: a ManifestEntry
        frontend: the FrontendConfig
        model_cfg: the ModelConfig, for the scene names and the longest
                   transcript the decoder takes
        read: the function turning a path into a Waveform

    Returns: a TrainingExample
    """
    mel = featurize(read(entry.path), frontend)
    if entry.is_noise:
        if entry.noise_scene not in model_cfg.noise_scenes:
            raise InvalidInput('%s: unknown noise scene %r'
                               % (entry.audio, entry.noise_scene))
        label = model_cfg.noise_scenes.index(entry.noise_scene) + 1
        return TrainingExample(mel, label)

    tokens = Tokenizer(model_cfg.alphabet).encode_target(entry.transcript)
    # The decoder sees every token but the last.
    if len(tokens) - 1 > model_cfg.max_target_len:
        raise InvalidInput('%s: transcript longer than %d characters'
                           % (entry.audio, model_cfg.max_target_len - 1))
    return TrainingExample(mel, SPEECH_CLASS, tokens, entry.cfh_class)


def load_examples(entries, frontend, model_cfg, read=read_wav):
    """
    Featurize every entry of a manifest.
    """
    examples = [example_from_entry(e, frontend, model_cfg, read)
                for e in entries]
    require(examples, 'the training manifest is empty')
    speech = sum(1 for ex in examples if ex.noise_label == SPEECH_CLASS)
    logger.info('featurized %d examples (%d speech, %d noise)',
                len(examples), speech, len(examples) - speech)
    return examples


def epoch_order(examples, rng, noise_fraction=None):
    """
    Return the example indices of one epoch in training order.

    Without a noise fraction every example appears once.  With one,
    every speech example appears once and noise examples are drawn with
    replacement until they make up that fraction of the epoch.

    Arguments:
        examples: the TrainingExamples
        rng: a numpy Generator, advanced by the call
        noise_fraction: None, or the share of noise items in (0, 1)

    Returns: a list of indices
    """
    if noise_fraction is None:
        return [int(i) for i in rng.permutation(len(examples))]
    speech = [i for i, ex in enumerate(examples)
              if ex.noise_label == SPEECH_CLASS]
    noise = [i for i, ex in enumerate(examples)
             if ex.noise_label != SPEECH_CLASS]
    require(speech and noise,
            'noise_fraction needs both speech and noise examples')
    n_noise = max(1, int(round(len(speech) * noise_fraction
                               / (1.0 - noise_fraction))))
    drawn = rng.choice(noise, size=n_noise, replace=True)
    merged = np.array(speech + [int(i) for i in drawn])
    return [int(i) for i in merged[rng.permutation(len(merged))]]


def epoch_length(examples, noise_fraction=None):
    if noise_fraction is None:
        return len(examples)
    speech = sum(1 for ex in examples if ex.noise_label == SPEECH_CLASS)
    return speech + max(1, int(round(speech * noise_fraction
                                     / (1.0 - noise_fraction))))


def schedule_horizon(n_items, train_cfg):
    """
    Return the number of optimizer steps a run will take.
    """
    per_epoch = int(math.ceil(n_items / train_cfg.batch_size))
    total = per_epoch * train_cfg.epochs
    if train_cfg.max_steps is not None:
        total = min(total, train_cfg.max_steps)
    return total


def _check_finite(breakdown, step):
    for name, value in breakdown.as_floats().items():
        if not math.isfinite(value):
            raise TrainingDiverged('%s is %r at step %d' % (name, value, step))


def gradients(objective, params):
    """
    Return the gradient of a scalar objective for every parameter.

    Parameters the objective does not reach get None.
    """
    names = params.names()
    if not objective.requires_grad:
        return {n: None for n in names}
    grads = torch.autograd.grad(objective, [params[n] for n in names],
                                allow_unused=True)
    return dict(zip(names, grads))


def score_examples(examples, params):
    """
    Score held-out examples with teacher forcing.

    Returns: (noise accuracy, token accuracy or None)
    """
    noise_correct = noise_total = token_correct = token_total = 0
    with torch.no_grad():
        for lo in range(0, len(examples), EVAL_CHUNK):
            loss = multitask_loss(Batch(examples[lo:lo + EVAL_CHUNK],
                                        params.dtype), params)
            noise_correct += loss.noise_correct
            noise_total += loss.noise_total
            token_correct += loss.token_correct
            token_total += loss.token_total
    return (noise_correct / noise_total,
            token_correct / token_total if token_total else None)


def evaluate_held_out(params, frontend, examples, entries, lexicon, tau):
    """
    Evaluate parameters on a held-out split.

    Returns: a dictionary with eval_accuracy, eval_macro_f1,
             eval_noise_accuracy and eval_token_accuracy
    """
    model = CallForHelpModel(params, frontend)
    events = [detect_features(ex.mel, model, lexicon, tau) for ex in examples]
    report = evaluate_cfh(events, entries, '4class', lexicon,
                          model.decoder_calls, tau)
    noise_accuracy, token_accuracy = score_examples(examples, params)
    return {'eval_accuracy': report.accuracy,
            'eval_macro_f1': report.macro_f1,
            'eval_noise_accuracy': noise_accuracy,
            'eval_token_accuracy': token_accuracy}


@dataclass
class TrainResult:
    """
    What a training run leaves behind.

    Arguments:
        params: the live ModelParameters
        ema: the EmaState
        history: one metrics dictionary per epoch
        steps: optimizer steps taken
        checkpoint_path: the last checkpoint written, if any
    """
    params: object
    ema: object
    history: list = field(default_factory=list)
    steps: int = 0
    checkpoint_path: str = None


def _save(out_dir, params, ema, frontend, meta):
    if out_dir is None:
        return None
    path = os.path.join(out_dir, CHECKPOINT_NAME)
    save_checkpoint(path, params, frontend,
                    ema=ema.as_parameters(params.config), meta=meta)
    return path


def train(cfg, train_entries, eval_entries=None, out_dir=None,
          read=read_wav, params=None):
    """
    Train a model on a manifest.

    Arguments:
        cfg: the RunConfig; its seed must be set
        train_entries: the training ManifestEntry objects
        eval_entries: held-out entries to evaluate on, or None
        out_dir: where the checkpoint and metrics log go, or None to
                 keep everything in memory
        read: the function turning a path into a Waveform
        params: starting ModelParameters, or None to initialize from
                the seed

    Returns: a TrainResult
    """
    require(cfg.seed is not None, 'training needs a seed')
    train_cfg = cfg.train
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    examples = load_examples(train_entries, cfg.frontend, cfg.model, read)
    held_out = []
    if eval_entries:
        held_out = [example_from_entry(e, cfg.frontend, cfg.model, read)
                    for e in eval_entries]
    lexicon = load_lexicon(cfg.lexicon)

    if params is None:
        params = init_parameters(cfg.model, cfg.seed)
    params.requires_grad_(True)
    logger.info('model has %d parameters, %d of them in the noise head',
                count_parameters(params),
                count_parameters(params, 'noise_head.'))

    total_steps = schedule_horizon(epoch_length(examples,
                                                train_cfg.noise_fraction),
                                   train_cfg)
    opt = new_optimizer_state(params, train_cfg, total_steps)
    ema = new_ema_state(params, train_cfg.ema_coefficient)
    rng = np.random.default_rng([cfg.seed, 1])
    result = TrainResult(params, ema)
    log = None
    if out_dir is not None:
        log = open(os.path.join(out_dir, METRICS_NAME), 'w')

    try:
        for epoch in range(1, train_cfg.epochs + 1):
            if opt.step >= total_steps:
                break
            sums = {'l_noise': 0.0, 'l_seq2seq': 0.0, 'l_multi': 0.0}
            batches = noise_correct = noise_total = 0
            token_correct = token_total = 0
            order = epoch_order(examples, rng, train_cfg.noise_fraction)
            for lo in range(0, len(order), train_cfg.batch_size):
                if opt.step >= total_steps:
                    break
                batch = [examples[i]
                         for i in order[lo:lo + train_cfg.batch_size]]
                loss = multitask_loss(batch, params, train_cfg.noise_weight)
                _check_finite(loss, opt.step)
                lr = cosine_lr(opt.step, total_steps, train_cfg.base_lr)
                adamw_step(params, gradients(loss.objective, params), opt, lr)
                ema_update(params, ema)

                for name, value in loss.as_floats().items():
                    sums[name] += value
                batches += 1
                noise_correct += loss.noise_correct
                noise_total += loss.noise_total
                token_correct += loss.token_correct
                token_total += loss.token_total

            row = {'epoch': epoch, 'step': opt.step,
                   'lr': cosine_lr(opt.step, total_steps, train_cfg.base_lr),
                   'train_noise_accuracy': noise_correct / noise_total,
                   'train_token_accuracy': (token_correct / token_total
                                            if token_total else None)}
            row.update({k: v / batches for k, v in sums.items()})
            last = epoch == train_cfg.epochs or opt.step >= total_steps
            if held_out and (epoch % train_cfg.eval_every == 0 or last):
                row.update(evaluate_held_out(
                    ema.as_parameters(cfg.model), cfg.frontend, held_out,
                    eval_entries, lexicon, cfg.tau))
            result.history.append(row)
            result.steps = opt.step

            logger.info('epoch %d step %d: l_multi %.4f (noise %.4f, '
                        'seq2seq %.4f), train noise accuracy %.3f',
                        epoch, opt.step, row['l_multi'], row['l_noise'],
                        row['l_seq2seq'], row['train_noise_accuracy'])
            if log is not None:
                log.write(json.dumps(row, sort_keys=True))
                log.write('\n')
                log.flush()
            result.checkpoint_path = _save(
                out_dir, params, ema, cfg.frontend,
                {'epoch': epoch, 'step': opt.step, 'seed': cfg.seed,
                 'preset': cfg.preset,
                 'noise_weight': train_cfg.noise_weight})
    except TrainingDiverged:
        logger.error('training diverged after %d steps; last checkpoint: %s',
                     opt.step, result.checkpoint_path)
        raise
    finally:
        if log is not None:
            log.close()

    params.requires_grad_(False)
    return result
