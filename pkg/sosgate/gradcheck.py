"""
The gradcheck module compares autograd gradients with central
differences.

For a sampled coordinate theta_i the numeric derivative is

    (f(theta + h e_i) - f(theta - h e_i)) / 2h,   h = eps * max(1, |theta_i|)

and its error against the analytic derivative a is

    |a - n| / max(|a|, |n|, 1e-4)

Checks run in double precision.  Coordinates are sampled per tensor
class (see sosgate.model.tensor_class) so small groups like the noise
head get as many samples as the encoder.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from .common import require
from .config import SOT, EOT, N_SPECIALS, SPEECH_CLASS
from .losses import (TrainingExample, Batch, noise_loss, seq2seq_loss,
                     multitask_loss)
from .model import (init_parameters, tensor_class, encode, mean_pool_time,
                    noise_head, decoder_forward)

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
DEFAULT_TOLERANCE = 1e-4
DEFAULT_SAMPLES = 200
ERROR_FLOOR = 1e-4


def central_difference(f, x, epsilon):
    """
    Return the central difference of a scalar function at x.
    """
    return (f(x + epsilon) - f(x - epsilon)) / (2.0 * epsilon)


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric),
                                         ERROR_FLOOR)


@dataclass
class GradcheckReport:
    """
    The outcome of one gradient check.

    Arguments:
        path: a name for the loss that was checked
        max_relative_error: the largest error over all coordinates
        per_class: tensor class -> {'samples', 'max_relative_error'}
        worst: the coordinate with the largest error, as a dictionary
    """
    path: str
    max_relative_error: float = 0.0
    per_class: dict = field(default_factory=dict)
    worst: dict = None

    @property
    def coordinates(self):
        return sum(c['samples'] for c in self.per_class.values())

    def passed(self, tolerance=DEFAULT_TOLERANCE):
        return self.max_relative_error <= tolerance

    def to_dict(self):
        return {'path': self.path,
                'max_relative_error': self.max_relative_error,
                'coordinates': self.coordinates,
                'per_class': self.per_class, 'worst': self.worst}


def _sample_coordinates(params, classes, samples, rng):
    by_class = {}
    for name, tensor in params.items():
        klass = tensor_class(name)
        if classes is None or klass in classes:
            by_class.setdefault(klass, []).append((name, tensor.numel()))

    picked = {}
    for klass, members in by_class.items():
        offsets = np.cumsum([0] + [n for _, n in members])
        count = min(samples, int(offsets[-1]))
        flat = np.sort(rng.choice(int(offsets[-1]), size=count,
                                  replace=False))
        coords = []
        for k in flat:
            j = int(np.searchsorted(offsets, k, side='right')) - 1
            coords.append((members[j][0], int(k - offsets[j])))
        picked[klass] = coords
    return picked


def gradcheck(loss_fn, params, epsilon=DEFAULT_EPSILON,
              samples=DEFAULT_SAMPLES, seed=0, classes=None, path='loss'):
    """
    Check the gradient of a scalar loss against central differences.

    Arguments:
        loss_fn: a function from ModelParameters to a scalar tensor
        params: the ModelParameters to check at (copied to float64)
        epsilon: the relative finite-difference step, > 0
        samples: coordinates sampled per tensor class
        seed: the seed of the coordinate sample
        classes: the tensor classes to sample, all of them when None
        path: a name for the report

    Returns: a GradcheckReport
    """
    require(epsilon > 0, 'epsilon must be positive')
    require(samples >= 1, 'samples must be >= 1')
    p = params.to(torch.float64).requires_grad_(True)
    names = p.names()
    grads = torch.autograd.grad(loss_fn(p), [p[n] for n in names],
                                allow_unused=True)
    analytic = {n: (g if g is not None else torch.zeros_like(p[n]))
                for n, g in zip(names, grads)}

    report = GradcheckReport(path)
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for klass, coords in _sample_coordinates(p, classes, samples,
                                                 rng).items():
            worst = 0.0
            for name, i in coords:
                flat = p[name].view(-1)
                original = float(flat[i])
                h = epsilon * max(1.0, abs(original))
                flat[i] = original + h
                plus = float(loss_fn(p))
                flat[i] = original - h
                minus = float(loss_fn(p))
                flat[i] = original

                numeric = (plus - minus) / (2.0 * h)
                a = float(analytic[name].view(-1)[i])
                error = relative_error(a, numeric)
                worst = max(worst, error)
                if report.worst is None or error > report.max_relative_error:
                    report.max_relative_error = error
                    report.worst = {'name': name, 'index': i,
                                    'analytic': a, 'numeric': numeric}
            report.per_class[klass] = {'samples': len(coords),
                                       'max_relative_error': worst}
    return report


def toy_examples(model_cfg, seed, n_speech=2, n_noise=1):
    """
    Build a small random batch of training examples for a model config.

    Frames are standard normal and transcripts are random alphabet
    characters, so the check does not depend on any audio.
    """
    rng = np.random.default_rng([seed, 2])
    shape = (model_cfg.n_frames, model_cfg.n_mels)
    examples = []
    for _ in range(n_speech):
        length = int(rng.integers(3, min(9, model_cfg.max_target_len)))
        chars = rng.integers(N_SPECIALS, model_cfg.vocab_size, size=length)
        tokens = [SOT] + [int(c) for c in chars] + [EOT]
        examples.append(TrainingExample(rng.standard_normal(shape),
                                        SPEECH_CLASS, tokens))
    for _ in range(n_noise):
        label = int(rng.integers(1, model_cfg.n_noise_classes + 1))
        examples.append(TrainingExample(rng.standard_normal(shape), label))
    return examples


def loss_paths(batch):
    """
    Return the losses a run checks, with the tensor classes each reaches.

    Returns: a list of (path name, loss function, tensor classes)
    """
    def noise_path(p):
        states = encode(batch.frames, p)
        return noise_loss(noise_head(mean_pool_time(states), p),
                          batch.noise_labels)

    def seq2seq_path(p):
        states = encode(batch.frames[batch.speech_index], p)
        rows = decoder_forward(batch.targets_in, states, p)
        return seq2seq_loss(rows, batch.targets_out, batch.pad_mask)

    def multitask_path(p):
        return multitask_loss(batch, p).l_multi

    return [
        ('noise_loss', noise_path, ('encoder', 'noise_head')),
        ('seq2seq_loss', seq2seq_path,
         ('encoder', 'embedding', 'decoder', 'asr_projection')),
        ('multitask', multitask_path, None),
    ]


def run_gradcheck(model_cfg, seed, epsilon=DEFAULT_EPSILON,
                  samples=DEFAULT_SAMPLES):
    """
    Check every loss path of a freshly initialized model.

    Arguments:
        model_cfg: the ModelConfig
        seed: seeds the parameters, the batch and the coordinate sample
        epsilon: the relative finite-difference step
        samples: coordinates sampled per tensor class

    Returns: a list of GradcheckReport, one per loss path
    """
    params = init_parameters(model_cfg, seed)
    batch = Batch(toy_examples(model_cfg, seed), dtype=torch.float64)
    reports = []
    for name, fn, classes in loss_paths(batch):
        report = gradcheck(fn, params, epsilon, samples, seed, classes, name)
        logger.info('%s: max relative error %.3g over %d coordinates',
                    name, report.max_relative_error, report.coordinates)
        reports.append(report)
    return reports
