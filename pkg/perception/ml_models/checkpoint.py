"""
Model checkpoints
A model directory holds model.gal (network weights and hyperparameters),
plc.bin (curve bank), m_l.rlb and m_s.rlb (response libraries). All arrays
are little-endian float32.

model.gal layout: b'GAL1', u32 version, u32 meta length, sorted-key JSON
meta, u32 section count, then per section: u16 name length, name, u8 ndim,
u32 per dim, float32 data.
"""
import json
import logging
import struct
from pathlib import Path

import numpy as np

from ..exceptions import DataError
from .curve_bank import CurveBank
from .fusion import (
    AttentionProjections, GarmentPerceptionModel, LibraryProjection, MaskHead, PatchDecoder, PatchEncoder,
)
from .response_library import ResponseLibrary

logger = logging.getLogger(__name__)

MAGIC = b'GAL1'
VERSION = 1
MODEL_FILE = 'model.gal'
FILES = {
    'curve_bank': 'plc.bin',
    'luminance_library': 'm_l.rlb',
    'structural_library': 'm_s.rlb',
}

_COMPONENT_TYPES = {
    'enc_rgb': PatchEncoder,
    'dec_rgb': PatchDecoder,
    'enc_depth': PatchEncoder,
    'dec_struct': PatchDecoder,
    'enc_struct': PatchEncoder,
    'attn_struct': AttentionProjections,
    'attn_lum': LibraryProjection,
    'attn_str': LibraryProjection,
    'head': MaskHead,
}


def _pack_section(name, array):
    encoded = name.encode('utf-8')
    head = struct.pack('<H', len(encoded)) + encoded + struct.pack('<B', array.ndim)
    head += struct.pack(f'<{array.ndim}I', *array.shape)
    return head + np.ascontiguousarray(array, dtype='<f4').tobytes()


def model_to_bytes(model, extra_meta=None):
    meta = {
        'hparams': model.hparams,
        'files': FILES,
        'sections': sorted(model.parameters()),
    }
    meta.update(extra_meta or {})
    encoded = json.dumps(meta, sort_keys=True).encode('utf-8')
    params = model.parameters()
    payload = [MAGIC, struct.pack('<II', VERSION, len(encoded)), encoded, struct.pack('<I', len(params))]
    payload.extend(_pack_section(name, params[name]) for name in sorted(params))
    return b''.join(payload)


def _read(fmt, payload, offset):
    size = struct.calcsize(fmt)
    if offset + size > len(payload):
        raise DataError('checkpoint is truncated')
    return struct.unpack_from(fmt, payload, offset), offset + size


def sections_from_bytes(payload):
    """Meta dict and name -> float64 array of a model.gal payload"""
    if payload[:4] != MAGIC:
        raise DataError('not a model checkpoint (bad magic)')
    (version, meta_len), offset = _read('<II', payload, 4)
    if version != VERSION:
        raise DataError(f'unsupported checkpoint version {version}')
    meta = json.loads(payload[offset:offset + meta_len].decode('utf-8'))
    offset += meta_len
    (count,), offset = _read('<I', payload, offset)
    sections = {}
    for _ in range(count):
        (name_len,), offset = _read('<H', payload, offset)
        name = payload[offset:offset + name_len].decode('utf-8')
        offset += name_len
        (ndim,), offset = _read('<B', payload, offset)
        shape, offset = _read(f'<{ndim}I', payload, offset)
        size = 4 * int(np.prod(shape))
        if offset + size > len(payload):
            raise DataError(f'checkpoint section {name} is truncated')
        data = np.frombuffer(payload, dtype='<f4', count=size // 4, offset=offset)
        sections[name] = data.reshape(shape).astype(np.float64)
        offset += size
    if offset != len(payload):
        raise DataError('trailing bytes after the last checkpoint section')
    return meta, sections


def _build_components(hparams, sections):
    patch = hparams['patch']
    components = {}
    for name, kind in _COMPONENT_TYPES.items():
        try:
            arrays = {
                key.split('.', 1)[1]: value
                for key, value in sections.items() if key.split('.', 1)[0] == name
            }
            if kind in (PatchEncoder, PatchDecoder):
                components[name] = kind(arrays['weight'], arrays['bias'], patch)
            else:
                components[name] = kind(**arrays)
        except (KeyError, TypeError) as exc:
            raise DataError(f'checkpoint is missing tensors of {name}: {exc}') from exc
    return components


def save_model(model, directory, extra_meta=None):
    """Quantize the live model to storage precision and write the model directory"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    model.quantize()
    (directory / FILES['curve_bank']).write_bytes(model.bank.to_bytes())
    (directory / FILES['luminance_library']).write_bytes(model.lib_l.to_bytes())
    (directory / FILES['structural_library']).write_bytes(model.lib_s.to_bytes())
    (directory / MODEL_FILE).write_bytes(model_to_bytes(model, extra_meta))
    logger.info('saved model to %s', directory)
    return directory


def read_meta(directory):
    meta, _ = sections_from_bytes(_read_file(Path(directory) / MODEL_FILE))
    return meta


def _read_file(path):
    if not path.is_file():
        raise DataError(f'model file not found: {path}')
    return path.read_bytes()


def load_model(directory):
    directory = Path(directory)
    meta, sections = sections_from_bytes(_read_file(directory / MODEL_FILE))
    files = meta.get('files', FILES)
    bank = CurveBank.from_bytes(_read_file(directory / files['curve_bank']))
    lib_l = ResponseLibrary.from_bytes(_read_file(directory / files['luminance_library']))
    lib_s = ResponseLibrary.from_bytes(_read_file(directory / files['structural_library']))
    hparams = meta['hparams']
    if bank.n_curves != hparams['n_curves'] or lib_l.dim != hparams['channels']:
        raise DataError('curve bank or library sizes disagree with the checkpoint hyperparameters')
    return GarmentPerceptionModel(hparams, bank, lib_l, lib_s, _build_components(hparams, sections))
