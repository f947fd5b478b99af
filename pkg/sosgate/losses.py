"""
The losses module provides the multitask training objective.

    l_multi = l_noise + l_seq2seq

l_noise is the cross-entropy of the noise head against the noise label
(0 for speech, 1..K for a noise scene), averaged over every item of a
batch.  l_seq2seq is the teacher-forced token cross-entropy of the
decoder, averaged over the real tokens of each transcript and then over
the items that have a transcript.  Noise-only items add nothing to
l_seq2seq and are left out of its average.
"""
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .audio import MelSpectrogram
from .common import InvalidInput, require
from .config import SPEECH_CLASS
from .model import encode, mean_pool_time, noise_head, decoder_forward
from .tokenizer import teacher_forcing_pair, pad_batch


@dataclass
class TrainingExample:
    """
    One featurized training item.

    Arguments:
        mel: frames of shape (T, B) as a numpy array or MelSpectrogram
        noise_label: 0 for speech, 1..K for a noise scene
        target_tokens: [sot, ..., eot] for speech, None for noise
        cfh_class: the call-for-help class of a speech item, if known
    """
    mel: np.ndarray
    noise_label: int
    target_tokens: list = None
    cfh_class: str = None

    def __post_init__(self):
        if isinstance(self.mel, MelSpectrogram):
            self.mel = self.mel.frames
        if self.noise_label == SPEECH_CLASS:
            require(bool(self.target_tokens),
                    'speech examples need target tokens')
        else:
            require(not self.target_tokens,
                    'noise examples must not carry target tokens')

    @property
    def has_transcript(self):
        return bool(self.target_tokens)


@dataclass
class LossBreakdown:
    """
    The components of the multitask loss for one batch.

    l_multi is always l_noise + l_seq2seq.  objective is what gets
    minimized: noise_weight * l_noise + l_seq2seq, which is l_multi
    itself when noise_weight is 1.
    """
    l_noise: torch.Tensor
    l_seq2seq: torch.Tensor
    l_multi: torch.Tensor
    objective: torch.Tensor
    noise_correct: int = 0
    noise_total: int = 0
    token_correct: int = 0
    token_total: int = 0

    def as_floats(self):
        return {'l_noise': float(self.l_noise),
                'l_seq2seq': float(self.l_seq2seq),
                'l_multi': float(self.l_multi)}


def noise_loss(logits, label):
    """
    Return the noise cross-entropy, -log softmax(logits)[label].

    Batched logits of shape (N, K+1) with N labels give the mean over
    the batch.

    Arguments:
        logits: a tensor of shape (K+1,) or (N, K+1)
        label: a class id in 0..K, or a sequence of N of them

    Returns: a scalar tensor
    """
    labels = torch.as_tensor(label, dtype=torch.long)
    n_classes = logits.shape[-1]
    if bool(((labels < 0) | (labels >= n_classes)).any()):
        raise InvalidInput('noise label out of range 0..%d' % (n_classes - 1,))
    if logits.dim() == 1:
        return -F.log_softmax(logits, dim=-1)[labels]
    require(labels.shape == (logits.shape[0],),
            'need one noise label per row of logits')
    return F.cross_entropy(logits, labels, reduction='mean')


def _masked_token_mean(logit_rows, targets_out, pad_mask):
    log_probs = F.log_softmax(logit_rows, dim=-1)
    picked = log_probs.gather(-1, targets_out.unsqueeze(-1)).squeeze(-1)
    mask = pad_mask.to(log_probs.dtype)
    counts = mask.sum(dim=-1)
    if bool((counts == 0).any()):
        raise InvalidInput('a sequence is masked everywhere')
    return -(picked * mask).sum(dim=-1) / counts


def seq2seq_loss(logit_rows, targets_out, pad_mask):
    """
    Return the mean token cross-entropy over the non-masked positions.

    For a batch of shape (N, L, V) the per-sequence means are averaged
    over the N sequences.

    Arguments:
        logit_rows: a tensor of shape (L, V) or (N, L, V)
        targets_out: target ids of shape (L,) or (N, L)
        pad_mask: booleans of shape (L,) or (N, L), True at real tokens

    Returns: a scalar tensor
    """
    targets_out = torch.as_tensor(targets_out, dtype=torch.long)
    pad_mask = torch.as_tensor(pad_mask, dtype=torch.bool)
    require(logit_rows.shape[:-1] == targets_out.shape == pad_mask.shape,
            'logit rows, targets and mask must have the same length')
    return _masked_token_mean(logit_rows, targets_out, pad_mask).mean()


class Batch(object):
    """
    A Batch holds a list of TrainingExamples as stacked tensors.

    Arguments:
        examples: a non-empty list of TrainingExamples
        dtype: the floating point type of the frames
    """
    def __init__(self, examples, dtype=torch.float32):
        if not examples:
            raise InvalidInput('empty batch')
        self.size = len(examples)
        self.frames = torch.from_numpy(
            np.stack([np.asarray(ex.mel) for ex in examples])).to(dtype)
        self.noise_labels = torch.tensor([ex.noise_label for ex in examples],
                                         dtype=torch.long)
        self.speech_index = [i for i, ex in enumerate(examples)
                             if ex.has_transcript]
        self.targets_in = None
        if self.speech_index:
            pairs = [teacher_forcing_pair(examples[i].target_tokens)
                     for i in self.speech_index]
            rows_in, mask = pad_batch([p[0] for p in pairs])
            rows_out, _ = pad_batch([p[1] for p in pairs])
            self.targets_in = torch.tensor(rows_in, dtype=torch.long)
            self.targets_out = torch.tensor(rows_out, dtype=torch.long)
            self.pad_mask = torch.tensor(mask, dtype=torch.bool)


def multitask_loss(examples, p, noise_weight=1.0):
    """
    Compute the multitask loss of a batch.

    Arguments:
        examples: a non-empty list of TrainingExamples, or a Batch
        p: ModelParameters
        noise_weight: the weight of l_noise in the objective

    Returns: a LossBreakdown
    """
    batch = examples if isinstance(examples, Batch) \
        else Batch(examples, dtype=p.dtype)

    states = encode(batch.frames.to(p.dtype), p)
    logits = noise_head(mean_pool_time(states), p)
    l_noise = noise_loss(logits, batch.noise_labels)
    noise_correct = int((logits.argmax(dim=-1) == batch.noise_labels).sum())

    token_correct = token_total = 0
    if batch.targets_in is not None:
        speech_states = states[batch.speech_index]
        rows = decoder_forward(batch.targets_in, speech_states, p)
        l_seq2seq = seq2seq_loss(rows, batch.targets_out, batch.pad_mask)
        hits = (rows.argmax(dim=-1) == batch.targets_out) & batch.pad_mask
        token_correct = int(hits.sum())
        token_total = int(batch.pad_mask.sum())
    else:
        l_seq2seq = torch.zeros((), dtype=l_noise.dtype)

    l_multi = l_noise + l_seq2seq
    if noise_weight == 1.0:
        objective = l_multi
    elif noise_weight == 0.0:
        objective = l_seq2seq
    else:
        objective = noise_weight * l_noise + l_seq2seq
    return LossBreakdown(l_noise, l_seq2seq, l_multi, objective,
                         noise_correct, batch.size,
                         token_correct, token_total)
