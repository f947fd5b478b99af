"""
The model module provides the toy encoder-decoder and its noise head.

The model is a pre-norm transformer in the Whisper layout: a two-layer
convolutional stem over log-mel frames, sinusoidal positions, an
encoder stack, and a decoder with causal self-attention and
cross-attention to the encoder.  A single affine noise head reads the
time-averaged encoder states and predicts speech (index 0) or one of K
noise scenes (indices 1..K).

Parameters live in a ModelParameters mapping of named tensors and every
operation is a function of (inputs, parameters), so training, EMA and
gradient checks all work on plain tensors.
"""
import math
from collections import OrderedDict

import numpy as np
import torch
import torch.nn.functional as F

from .audio import MelSpectrogram, featurize
from .common import require
from .config import SOT, EOT
from .tokenizer import Tokenizer

LAYER_NORM_EPS = 1e-5


class ModelParameters(object):
    """
    ModelParameters hold every learnable tensor of a model by name.

    Arguments:
        config: the ModelConfig the tensors were shaped for
        tensors: an ordered mapping from names to tensors
    """
    def __init__(self, config, tensors):
        self.config = config
        self.tensors = OrderedDict(tensors)

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def names(self):
        return list(self.tensors)

    def map(self, func):
        """
        Return new ModelParameters with func applied to every tensor.
        """
        return ModelParameters(self.config,
                               [(n, func(t)) for n, t in self.items()])

    def detach_clone(self):
        return self.map(lambda t: t.detach().clone())

    def to(self, dtype):
        return self.map(lambda t: t.detach().to(dtype).clone())

    def requires_grad_(self, flag=True):
        for t in self.tensors.values():
            t.requires_grad_(flag)
        return self

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype


def _attention_shapes(prefix, d):
    shapes = []
    for proj in ('query', 'key', 'value', 'out'):
        shapes.append((prefix + '.' + proj + '.weight', (d, d), d, 'weight'))
        shapes.append((prefix + '.' + proj + '.bias', (d,), d, 'bias'))
    return shapes


def _layer_norm_shapes(prefix, d):
    return [(prefix + '.weight', (d,), d, 'gain'),
            (prefix + '.bias', (d,), d, 'bias')]


def _mlp_shapes(prefix, d, hidden):
    return [(prefix + '.fc1.weight', (hidden, d), d, 'weight'),
            (prefix + '.fc1.bias', (hidden,), d, 'bias'),
            (prefix + '.fc2.weight', (d, hidden), hidden, 'weight'),
            (prefix + '.fc2.bias', (d,), hidden, 'bias')]


def parameter_shapes(cfg):
    """
    List every learnable tensor of a config in a fixed order.

    Arguments:
        cfg: a ModelConfig

    Returns: a list of (name, shape, fan_in, kind) tuples where kind is
             'weight', 'bias' or 'gain'
    """
    d = cfg.d_model
    hidden = cfg.mlp_ratio * d
    shapes = [
        ('encoder.conv1.weight', (d, cfg.n_mels, 3), cfg.n_mels * 3, 'weight'),
        ('encoder.conv1.bias', (d,), cfg.n_mels * 3, 'bias'),
        ('encoder.conv2.weight', (d, d, 3), d * 3, 'weight'),
        ('encoder.conv2.bias', (d,), d * 3, 'bias'),
    ]
    for i in range(cfg.n_enc_layers):
        block = 'encoder.blocks.%d' % i
        shapes += _layer_norm_shapes(block + '.attn_ln', d)
        shapes += _attention_shapes(block + '.attn', d)
        shapes += _layer_norm_shapes(block + '.mlp_ln', d)
        shapes += _mlp_shapes(block + '.mlp', d, hidden)
    shapes += _layer_norm_shapes('encoder.ln_post', d)

    shapes.append(('decoder.token_embedding', (cfg.vocab_size, d), d,
                   'weight'))
    for i in range(cfg.n_dec_layers):
        block = 'decoder.blocks.%d' % i
        shapes += _layer_norm_shapes(block + '.attn_ln', d)
        shapes += _attention_shapes(block + '.attn', d)
        shapes += _layer_norm_shapes(block + '.cross_attn_ln', d)
        shapes += _attention_shapes(block + '.cross_attn', d)
        shapes += _layer_norm_shapes(block + '.mlp_ln', d)
        shapes += _mlp_shapes(block + '.mlp', d, hidden)
    shapes += _layer_norm_shapes('decoder.ln', d)
    shapes.append(('decoder.proj.weight', (cfg.vocab_size, d), d, 'weight'))
    shapes.append(('decoder.proj.bias', (cfg.vocab_size,), d, 'bias'))

    k1 = cfg.n_noise_classes + 1
    shapes.append(('noise_head.weight', (d, k1), d, 'weight'))
    shapes.append(('noise_head.bias', (k1,), d, 'bias'))
    return shapes


def tensor_class(name):
    """
    Return the group a parameter belongs to.

    The groups are 'encoder', 'embedding', 'decoder', 'asr_projection'
    and 'noise_head'.
    """
    if name.startswith('noise_head.'):
        return 'noise_head'
    if name.startswith('decoder.proj.'):
        return 'asr_projection'
    if name == 'decoder.token_embedding':
        return 'embedding'
    return name.split('.', 1)[0]


def init_parameters(cfg, seed):
    """
    Create the parameters of a model deterministically from a seed.

    Weights are drawn uniformly from +-1/sqrt(fan_in), biases are zero
    and layer-norm gains are one.

    Arguments:
        cfg: a ModelConfig
        seed: an integer seed

    Returns: float32 ModelParameters
    """
    rng = np.random.default_rng(seed)
    tensors = []
    for name, shape, fan_in, kind in parameter_shapes(cfg):
        if kind == 'bias':
            value = np.zeros(shape)
        elif kind == 'gain':
            value = np.ones(shape)
        else:
            bound = 1.0 / math.sqrt(fan_in)
            value = rng.uniform(-bound, bound, size=shape)
        tensors.append((name, torch.from_numpy(value.astype(np.float32))))
    return ModelParameters(cfg, tensors)


def count_parameters(p, prefix=''):
    """
    Count the scalar parameters whose names start with a prefix.
    """
    return sum(t.numel() for n, t in p.items() if n.startswith(prefix))


def sinusoids(length, channels, max_timescale=10000):
    """
    Return sinusoidal position encodings of shape (length, channels).
    """
    assert channels % 2 == 0, 'sinusoids need an even channel count'
    half = channels // 2
    increment = math.log(max_timescale) / max(half - 1, 1)
    inv_timescales = torch.exp(-increment * torch.arange(half,
                                                         dtype=torch.float64))
    scaled = (torch.arange(length, dtype=torch.float64)[:, None]
              * inv_timescales[None, :])
    return torch.cat([torch.sin(scaled), torch.cos(scaled)], dim=1)


def _linear(x, p, prefix):
    return F.linear(x, p[prefix + '.weight'], p[prefix + '.bias'])


def _layer_norm(x, p, prefix):
    return F.layer_norm(x, (x.shape[-1],), p[prefix + '.weight'],
                        p[prefix + '.bias'], eps=LAYER_NORM_EPS)


def _attention(x, source, p, prefix, n_heads, causal=False):
    n, t_q, d = x.shape
    t_k = source.shape[1]
    head = d // n_heads

    q = _linear(x, p, prefix + '.query')
    k = _linear(source, p, prefix + '.key')
    v = _linear(source, p, prefix + '.value')
    q = q.view(n, t_q, n_heads, head).transpose(1, 2)
    k = k.view(n, t_k, n_heads, head).transpose(1, 2)
    v = v.view(n, t_k, n_heads, head).transpose(1, 2)

    scores = q @ k.transpose(-2, -1) / math.sqrt(head)
    if causal:
        future = torch.ones(t_q, t_k, dtype=torch.bool).triu(1)
        scores = scores.masked_fill(future, float('-inf'))
    weights = scores.softmax(dim=-1)
    out = (weights @ v).transpose(1, 2).reshape(n, t_q, d)
    return _linear(out, p, prefix + '.out')


def _mlp(x, p, prefix):
    return _linear(F.gelu(_linear(x, p, prefix + '.fc1')), p, prefix + '.fc2')


def _as_frames(mel, p):
    if isinstance(mel, MelSpectrogram):
        mel = mel.frames
    if not torch.is_tensor(mel):
        mel = torch.as_tensor(np.asarray(mel))
    return mel.to(p.dtype)


def encode(mel, p):
    """
    Run the encoder over log-mel frames.

    Arguments:
        mel: a MelSpectrogram, or frames of shape (T, B) or (N, T, B)
        p: ModelParameters

    Returns: encoder states of shape (T', d_model), or (N, T', d_model)
             for batched input, with T' = ceil(T / 2)
    """
    cfg = p.config
    frames = _as_frames(mel, p)
    single = frames.dim() == 2
    if single:
        frames = frames.unsqueeze(0)
    require(frames.dim() == 3
            and tuple(frames.shape[1:]) == (cfg.n_frames, cfg.n_mels),
            'mel shape %s does not match the expected (%d, %d)'
            % (tuple(frames.shape[-2:]), cfg.n_frames, cfg.n_mels))

    x = frames.transpose(1, 2)
    x = F.gelu(F.conv1d(x, p['encoder.conv1.weight'],
                        p['encoder.conv1.bias'], padding=1))
    x = F.gelu(F.conv1d(x, p['encoder.conv2.weight'],
                        p['encoder.conv2.bias'], stride=2, padding=1))
    x = x.transpose(1, 2)
    x = x + sinusoids(x.shape[1], cfg.d_model).to(x.dtype)

    for i in range(cfg.n_enc_layers):
        block = 'encoder.blocks.%d' % i
        h = _layer_norm(x, p, block + '.attn_ln')
        x = x + _attention(h, h, p, block + '.attn', cfg.n_heads)
        x = x + _mlp(_layer_norm(x, p, block + '.mlp_ln'), p, block + '.mlp')
    x = _layer_norm(x, p, 'encoder.ln_post')
    return x[0] if single else x


def mean_pool_time(e):
    """
    Average encoder states over the time axis.

    Arguments:
        e: encoder states of shape (T', d) or (N, T', d)

    Returns: a vector of length d, or an (N, d) matrix
    """
    require(e.shape[-2] >= 1, 'cannot pool zero frames')
    return e.mean(dim=-2)


def noise_head(pooled, p):
    """
    Apply the noise head: pooled @ W + b.

    Arguments:
        pooled: a vector of length d, or an (N, d) matrix
        p: ModelParameters

    Returns: logits over K+1 classes, index 0 being speech
    """
    return pooled @ p['noise_head.weight'] + p['noise_head.bias']


def _as_tokens(targets_in):
    if torch.is_tensor(targets_in):
        return targets_in.long()
    return torch.as_tensor(targets_in, dtype=torch.long)


def decoder_forward(targets_in, e, p):
    """
    Run the decoder with teacher forcing.

    Row t of the output depends only on targets_in[..t] and e.

    Arguments:
        targets_in: token ids of shape (L,) or (N, L), starting with sot
        e: encoder states of shape (T', d) or (N, T', d)
        p: ModelParameters

    Returns: logits of shape (L, vocab_size), or (N, L, vocab_size)
    """
    cfg = p.config
    tokens = _as_tokens(targets_in)
    single = tokens.dim() == 1
    if single:
        tokens = tokens.unsqueeze(0)
        e = e.unsqueeze(0)
    require(tokens.dim() == 2 and tokens.shape[1] >= 1,
            'targets_in must be a non-empty token sequence')
    require(tokens.shape[1] <= cfg.max_target_len,
            'targets_in longer than max_target_len %d' % cfg.max_target_len)
    require(bool(((tokens >= 0) & (tokens < cfg.vocab_size)).all()),
            'token id out of range')
    require(bool((tokens[:, 0] == SOT).all()),
            'targets_in must begin with sot')

    length = tokens.shape[1]
    x = p['decoder.token_embedding'][tokens]
    x = x + sinusoids(length, cfg.d_model).to(x.dtype)

    for i in range(cfg.n_dec_layers):
        block = 'decoder.blocks.%d' % i
        h = _layer_norm(x, p, block + '.attn_ln')
        x = x + _attention(h, h, p, block + '.attn', cfg.n_heads, causal=True)
        h = _layer_norm(x, p, block + '.cross_attn_ln')
        x = x + _attention(h, e, p, block + '.cross_attn', cfg.n_heads)
        x = x + _mlp(_layer_norm(x, p, block + '.mlp_ln'), p, block + '.mlp')
    x = _layer_norm(x, p, 'decoder.ln')
    logits = _linear(x, p, 'decoder.proj')
    return logits[0] if single else logits


def greedy_decode(e, p, max_len):
    """
    Decode a transcript by repeatedly appending the argmax token.

    Decoding stops after eot or after max_len tokens, whichever comes
    first, so without an eot exactly max_len tokens come back.

    Arguments:
        e: encoder states of shape (T', d)
        p: ModelParameters
        max_len: the most tokens to produce, in 1..max_target_len

    Returns: the produced token ids, without sot, ending with eot when
             one was produced
    """
    require(1 <= max_len <= p.config.max_target_len,
            'max_len must be in 1..%d' % p.config.max_target_len)
    tokens = [SOT]
    out = []
    with torch.no_grad():
        for _ in range(max_len):
            logits = decoder_forward(tokens, e, p)
            token = int(torch.argmax(logits[-1]))
            out.append(token)
            if token == EOT:
                break
            tokens.append(token)
    return out


class CallForHelpModel(object):
    """
    A CallForHelpModel bundles parameters with their frontend and
    tokenizer, and runs the inference steps the detection pipeline
    needs one utterance at a time.

    Arguments:
        params: ModelParameters
        frontend: the FrontendConfig the parameters were trained with
    """
    def __init__(self, params, frontend):
        self.params = params
        self.frontend = frontend
        self.tokenizer = Tokenizer(params.config.alphabet)
        self.decoder_calls = 0

    @property
    def config(self):
        return self.params.config

    @property
    def noise_scenes(self):
        return self.params.config.noise_scenes

    def featurize(self, w):
        return featurize(w, self.frontend)

    def encode(self, mel):
        with torch.no_grad():
            return encode(mel, self.params)

    def noise_logits(self, states):
        """
        Return the noise head logits of encoder states as numpy.
        """
        with torch.no_grad():
            logits = noise_head(mean_pool_time(states), self.params)
        return logits.double().numpy()

    def transcribe(self, states, max_len=None):
        """
        Greedy-decode encoder states.

        Returns: (tokens, text)
        """
        self.decoder_calls += 1
        if max_len is None:
            max_len = self.config.max_target_len - 1
        tokens = greedy_decode(states, self.params, max_len)
        return tokens, self.tokenizer.decode(tokens)
