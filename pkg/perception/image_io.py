"""
Image file IO
8-bit PNG for RGB images and masks, 16-bit PGM (millimetres, 0 = hole) for depth.
"""
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import DataError
from .imageproc import DepthMap

MAX_DEPTH_MM = 65535


def quantize_rgb(rgb):
    """Float image as it reads back after an 8-bit write"""
    return to_uint8(rgb) / 255.0


def to_uint8(rgb):
    return np.round(np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def quantize_depth(d):
    """DepthMap as it reads back after a millimetre PGM write"""
    return depth_from_mm(depth_to_mm(d))


def depth_to_mm(d):
    millimetres = np.where(d.holes, 0.0, np.round(np.nan_to_num(d.depth) * 1000.0))
    if millimetres.max(initial=0) > MAX_DEPTH_MM:
        raise DataError('depth exceeds the 16-bit millimetre range')
    return millimetres.astype(np.uint16)


def depth_from_mm(millimetres):
    millimetres = np.asarray(millimetres, dtype=np.float64)
    return DepthMap(depth=millimetres / 1000.0, valid=millimetres > 0)


def _open(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f'image file not found: {path}')
    try:
        return Image.open(path)
    except OSError as exc:
        raise DataError(f'cannot decode image {path}: {exc}') from exc


def write_rgb(path, rgb):
    Image.fromarray(to_uint8(rgb), mode='RGB').save(path, format='PNG')


def read_rgb(path):
    with _open(path) as image:
        return np.asarray(image.convert('RGB'), dtype=np.float64) / 255.0


def write_mask(path, mask):
    mask = np.asarray(mask)
    if mask.size and (mask.min() < 0 or mask.max() > 255):
        raise DataError('mask class ids must fit in 8 bits')
    Image.fromarray(mask.astype(np.uint8), mode='L').save(path, format='PNG')


def read_mask(path):
    with _open(path) as image:
        if image.mode not in ('L', 'P'):
            raise DataError(f'mask {path} must be a single-channel 8-bit PNG, got mode {image.mode}')
        return np.asarray(image, dtype=np.int64)


def write_depth(path, d):
    Image.fromarray(depth_to_mm(d).astype(np.int32), mode='I').save(path, format='PPM')


def read_depth(path):
    with _open(path) as image:
        return depth_from_mm(np.asarray(image))
