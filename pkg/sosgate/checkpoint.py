"""
The checkpoint module saves and loads model parameters.

A checkpoint file has three sections:

    magic     8 bytes, b'SOSGCKPT'
    header    u32 little-endian version (1), u32 little-endian byte
              length of the JSON document that follows, then the JSON
              document (UTF-8)
    data      every tensor as little-endian float32 values in row-major
              order, concatenated

The JSON document holds the frontend config, the model config, free
form metadata, and one table per weight set ('live' and optionally
'ema').  Each table entry is {"name", "shape", "offset", "count"} where
offset is a byte offset into the data section.
"""
import json
import os
import struct
from collections import namedtuple

import numpy as np
import torch

from .common import InvalidInput
from .config import FrontendConfig, ModelConfig
from .model import ModelParameters, CallForHelpModel

MAGIC = b'SOSGCKPT'
VERSION = 1

Checkpoint = namedtuple('Checkpoint', ['params', 'ema', 'frontend', 'meta'])


def _table(params, offset, chunks):
    entries = []
    for name, tensor in params.items():
        data = tensor.detach().cpu().numpy().astype('<f4')
        entries.append({'name': name, 'shape': list(data.shape),
                        'offset': offset, 'count': int(data.size)})
        raw = data.tobytes(order='C')
        chunks.append(raw)
        offset += len(raw)
    return entries, offset


def save_checkpoint(path, params, frontend, ema=None, meta=None):
    """
    Write parameters (and an optional EMA shadow) to a checkpoint file.

    The file is written next to its destination and moved into place,
    so an existing checkpoint survives a failed write.

    Arguments:
        path: the destination path
        params: the live ModelParameters
        frontend: the FrontendConfig the parameters expect
        ema: EMA ModelParameters, or None
        meta: a JSON-serializable dictionary, or None
    """
    chunks = []
    sets = {}
    sets['live'], offset = _table(params, 0, chunks)
    if ema is not None:
        sets['ema'], offset = _table(ema, offset, chunks)

    model = params.config
    document = {
        'frontend': {
            'target_rate': frontend.target_rate,
            'fft_size': frontend.fft_size,
            'hop': frontend.hop,
            'mel_bins': frontend.mel_bins,
            'window': frontend.window,
            'clip_seconds': frontend.clip_seconds,
        },
        'model': {
            'd_model': model.d_model,
            'n_heads': model.n_heads,
            'n_enc_layers': model.n_enc_layers,
            'n_dec_layers': model.n_dec_layers,
            'max_target_len': model.max_target_len,
            'n_mels': model.n_mels,
            'n_frames': model.n_frames,
            'alphabet': model.alphabet,
            'noise_scenes': list(model.noise_scenes),
            'mlp_ratio': model.mlp_ratio,
        },
        'meta': meta or {},
        'sets': sets,
    }
    header = json.dumps(document, sort_keys=True).encode('utf-8')

    tmp_path = '%s.tmp' % (path,)
    with open(tmp_path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<II', VERSION, len(header)))
        f.write(header)
        for chunk in chunks:
            f.write(chunk)
    os.replace(tmp_path, path)


def _read_set(entries, data, config):
    tensors = []
    for entry in entries:
        start = entry['offset']
        end = start + 4 * entry['count']
        if end > len(data):
            raise InvalidInput('checkpoint tensor %s is truncated'
                               % (entry['name'],))
        values = np.frombuffer(data[start:end], dtype='<f4')
        values = values.reshape(entry['shape']).astype(np.float32)
        tensors.append((entry['name'], torch.from_numpy(values)))
    return ModelParameters(config, tensors)


def load_checkpoint(path):
    """
    Read a checkpoint file.

    Arguments:
        path: the checkpoint path

    Returns: a Checkpoint of (params, ema or None, frontend, meta)
    """
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise InvalidInput('cannot read checkpoint %s: %s' % (path, e))

    if blob[:len(MAGIC)] != MAGIC:
        raise InvalidInput('%s is not a checkpoint' % (path,))
    pos = len(MAGIC)
    try:
        version, header_len = struct.unpack_from('<II', blob, pos)
    except struct.error:
        raise InvalidInput('checkpoint %s is truncated' % (path,))
    if version != VERSION:
        raise InvalidInput('unsupported checkpoint version %d' % (version,))
    pos += 8
    try:
        document = json.loads(blob[pos:pos + header_len].decode('utf-8'))
    except ValueError as e:
        raise InvalidInput('checkpoint %s has a bad header: %s' % (path, e))
    data = blob[pos + header_len:]

    try:
        frontend = FrontendConfig(**document['frontend'])
        config = ModelConfig(**document['model'])
        params = _read_set(document['sets']['live'], data, config)
        ema = None
        if 'ema' in document['sets']:
            ema = _read_set(document['sets']['ema'], data, config)
    except (KeyError, TypeError) as e:
        raise InvalidInput('checkpoint %s has a bad header: %r' % (path, e))
    return Checkpoint(params, ema, frontend, document.get('meta', {}))


def load_model(path, use_ema=True):
    """
    Load a checkpoint as a CallForHelpModel ready for detection.

    Arguments:
        path: the checkpoint path
        use_ema: take the EMA weights when the checkpoint has them

    Returns: a CallForHelpModel
    """
    ckpt = load_checkpoint(path)
    params = ckpt.ema if use_ema and ckpt.ema is not None else ckpt.params
    return CallForHelpModel(params, ckpt.frontend)
