"""
Synthetic multi-illumination garment scenes
Garment-like blobs on a textured backdrop rendered as RGB, depth and mask,
then degraded across illumination levels and written to disk as a corpus.
"""
import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy import ndimage
from sklearn.utils import check_random_state

from .exceptions import DataError
from .image_io import (
    quantize_depth, quantize_rgb, read_depth, read_mask, read_rgb, write_depth, write_mask, write_rgb,
)
from .imageproc import DepthMap, rgb_to_luma
from .serializers import SceneMetaSerializer

logger = logging.getLogger(__name__)

BACKDROP_DEPTH_M = 1.0
LUMINANCE_BANDS = ('0-30', '30-60', '60-90', '90-120')

# base colour and wrinkle frequency (cycles across the shorter image side) per class
GARMENT_STYLE = {
    1: ((0.78, 0.30, 0.26), 3.0),   # glove
    2: ((0.22, 0.34, 0.70), 4.0),   # hat
    3: ((0.86, 0.74, 0.30), 5.0),   # scarf
    4: ((0.40, 0.62, 0.36), 6.0),   # sock
    5: ((0.56, 0.24, 0.56), 7.0),   # tie
    6: ((0.80, 0.80, 0.78), 2.5),   # top
    7: ((0.30, 0.28, 0.26), 3.5),   # trousers
    8: ((0.30, 0.66, 0.74), 4.5),   # brief
}
# pale table top, luma near 0.7
BACKDROP_COLOR = np.array([0.72, 0.70, 0.66])


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int = 64
    height: int = 64
    garment_count: int = 1
    classes: tuple = (1,)
    illumination: float = 1.0


@dataclass(frozen=True)
class DegradeParams:
    gamma: float
    gain: float
    black_crush: float
    color_temp_shift: float
    noise_sigma: float
    blur_sigma: float


@dataclass(frozen=True)
class Scene:
    rgb: np.ndarray
    depth: DepthMap
    mask: np.ndarray
    spec: SceneSpec
    mean_luma: float


def mean_luma(rgb):
    return float(255.0 * rgb_to_luma(rgb).mean())


def luminance_band(value):
    """Evaluation band of a 0-255 mean luma; values above 120 fall in the top band"""
    index = min(int(max(value, 0.0) // 30), len(LUMINANCE_BANDS) - 1)
    return LUMINANCE_BANDS[index]


def random_spec(seed, width=64, height=64, max_garments=4, illumination=1.0):
    """Garment count in 1..max_garments and distinct classes drawn from the seed"""
    if not 1 <= max_garments <= len(GARMENT_STYLE):
        raise DataError(f'max_garments must lie in [1, {len(GARMENT_STYLE)}], got {max_garments}')
    rng = check_random_state(seed)
    count = int(rng.randint(1, max_garments + 1))
    classes = tuple(int(c) for c in rng.choice(sorted(GARMENT_STYLE), size=count, replace=False))
    return SceneSpec(seed, width, height, count, classes, illumination)


def _backdrop(rng, height, width):
    texture = ndimage.gaussian_filter(rng.standard_normal((height, width)), 3.0)
    texture /= np.abs(texture).max() or 1.0
    return np.clip(BACKDROP_COLOR[None, None, :] + 0.03 * texture[..., None], 0.0, 1.0)


def _garment(rng, height, width, frequency):
    """Height field (m), support mask and wrinkle phase map of one garment"""
    side = min(height, width)
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    center = rng.uniform(0.25, 0.75, size=2) * (height, width)
    field = np.zeros((height, width))
    for _ in range(rng.randint(3, 7)):
        offset = rng.uniform(-0.12, 0.12, size=2) * side
        sigma = rng.uniform(0.06, 0.12) * side
        amplitude = rng.uniform(0.02, 0.05)
        r2 = (rows - center[0] - offset[0]) ** 2 + (cols - center[1] - offset[1]) ** 2
        field += amplitude * np.exp(-r2 / (2.0 * sigma ** 2))
    support = field > 0.25 * field.max()
    theta = rng.uniform(0.0, np.pi)
    phase = 2.0 * np.pi * frequency * (rows * np.sin(theta) + cols * np.cos(theta)) / side
    wrinkle = 0.5 * (1.0 + np.sin(phase + rng.uniform(0.0, 2.0 * np.pi)))
    return field, support, wrinkle


def generate_scene(spec):
    """Deterministic render of `spec`; illumination below 1 is applied through `degrade`"""
    if spec.garment_count != len(spec.classes):
        raise DataError('garment_count must match the number of classes')
    unknown = set(spec.classes) - set(GARMENT_STYLE)
    if unknown:
        raise DataError(f'unknown garment classes {sorted(unknown)}')
    if spec.width < 1 or spec.height < 1:
        raise DataError('scene needs positive width and height')

    rng = check_random_state(spec.seed)
    height, width = spec.height, spec.width
    rgb = _backdrop(rng, height, width)
    depth = np.full((height, width), BACKDROP_DEPTH_M)
    mask = np.zeros((height, width), dtype=np.int64)
    for class_id in spec.classes:
        color, frequency = GARMENT_STYLE[class_id]
        field, support, wrinkle = _garment(rng, height, width, frequency)
        # later garments lie on top of whatever is beneath them
        depth = np.where(support, depth - field - 0.004 * wrinkle, depth)
        shade = (0.8 + 0.2 * wrinkle)[..., None] * np.asarray(color)[None, None, :]
        rgb = np.where(support[..., None], shade, rgb)
        mask[support] = class_id

    scene = Scene(
        rgb=rgb,
        depth=DepthMap.from_array(depth),
        mask=mask,
        spec=replace(spec, illumination=1.0),
        mean_luma=mean_luma(rgb),
    )
    return scene if spec.illumination >= 1.0 else degrade(scene, spec.illumination)


def degrade_params(level):
    """Fixed monotone schedules; level 1 is the identity"""
    if not 0.0 <= level <= 1.0:
        raise DataError(f'illumination level must lie in [0, 1], got {level}')
    loss = 1.0 - level
    return DegradeParams(
        gamma=1.0 + 2.0 * loss,
        gain=level,
        black_crush=0.05 * loss,
        color_temp_shift=0.1 * loss,
        noise_sigma=0.03 * loss,
        blur_sigma=1.5 * loss,
    )


def _noise_seed(seed, level):
    return (int(seed) * 1000003 + int(round(level * 1000))) % (2 ** 32)


def degrade(scene, level):
    """
    Gain, gamma, black crush, colour-temperature tilt, signal-dependent noise
    and blur, in that order. Only RGB changes. Not compositional: degrading
    twice at 0.8 differs from once at 0.64. Levels at or below 0.25 crush every
    pixel of a [0, 1] image to black.
    """
    params = degrade_params(level)
    spec = replace(scene.spec, illumination=float(level))
    if level == 1.0:
        return replace(scene, rgb=scene.rgb.copy(), spec=spec)

    rgb = scene.rgb * params.gain
    rgb = rgb ** params.gamma
    rgb = np.where(rgb < params.black_crush, 0.0, rgb)
    tilt = np.array([1.0 - params.color_temp_shift, 1.0, 1.0 + params.color_temp_shift])
    rgb = rgb * tilt
    if params.noise_sigma > 0:
        rng = check_random_state(_noise_seed(scene.spec.seed, level))
        rgb = rgb + params.noise_sigma * np.sqrt(rgb) * rng.standard_normal(rgb.shape)
    if params.blur_sigma > 0:
        rgb = ndimage.gaussian_filter(rgb, sigma=(params.blur_sigma, params.blur_sigma, 0))
    rgb = np.clip(rgb, 0.0, 1.0)
    return replace(scene, rgb=rgb, spec=spec, mean_luma=mean_luma(rgb))


def corrupt_depth(d, seed, noise_sigma=0.0, hole_fraction=0.0):
    """Sensor-style Gaussian noise (m) and randomly dropped pixels"""
    if noise_sigma < 0 or not 0.0 <= hole_fraction < 1.0:
        raise DataError('depth noise must be >= 0 and hole fraction in [0, 1)')
    if noise_sigma == 0 and hole_fraction == 0:
        return d
    rng = check_random_state(_noise_seed(seed, 2.0))
    depth = d.depth + noise_sigma * rng.standard_normal(d.shape)
    valid = d.valid & (rng.uniform(size=d.shape) >= hole_fraction) & (depth > 0)
    return DepthMap(depth=np.where(valid, depth, 0.0), valid=valid)


def quantize_scene(scene):
    """Scene exactly as it reads back from disk"""
    rgb = quantize_rgb(scene.rgb)
    return replace(scene, rgb=rgb, depth=quantize_depth(scene.depth), mean_luma=mean_luma(rgb))


def level_dirname(level):
    return f'{level:.2f}'


def scene_meta(scene, params, depth_noise_sigma=0.0, depth_hole_fraction=0.0):
    spec = asdict(scene.spec)
    spec['classes'] = list(spec['classes'])
    return {
        'spec': spec,
        'params': asdict(params),
        'mean_luma': round(scene.mean_luma, 6),
        'band': luminance_band(scene.mean_luma),
        'depth_noise_sigma': depth_noise_sigma,
        'depth_hole_fraction': depth_hole_fraction,
    }


def _write_triplet(target, scene, meta):
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    write_rgb(target / 'rgb.png', scene.rgb)
    write_depth(target / 'depth.pgm', scene.depth)
    write_mask(target / 'mask.png', scene.mask)
    (target / 'meta.json').write_text(json.dumps(meta, indent=2, sort_keys=True) + '\n')
    return str(target)


def make_corpus(out_dir, seeds, levels, width=64, height=64, max_garments=4,
                depth_noise_sigma=0.0, depth_hole_fraction=0.0, workers=1):
    """
    Write <out_dir>/<seed>/<level>/{rgb.png, depth.pgm, mask.png, meta.json}
    for every seed and level. Returns the triplet directories in seed, level order.
    """
    seeds, levels = list(seeds), list(levels)
    if not seeds or not levels:
        raise DataError('corpus needs at least one seed and one level')
    jobs = []
    for seed in seeds:
        base = generate_scene(random_spec(seed, width, height, max_garments))
        depth = corrupt_depth(base.depth, seed, depth_noise_sigma, depth_hole_fraction)
        for level in levels:
            params = degrade_params(level)
            scene = quantize_scene(replace(degrade(base, level), depth=depth))
            serializer = SceneMetaSerializer(
                data=scene_meta(scene, params, depth_noise_sigma, depth_hole_fraction)
            )
            serializer.is_valid(raise_exception=True)
            target = Path(out_dir) / str(seed) / level_dirname(level)
            jobs.append(delayed(_write_triplet)(target, scene, serializer.validated_data))
    written = Parallel(n_jobs=workers)(jobs)
    logger.info('wrote %d triplets for %d seeds to %s', len(written), len(seeds), out_dir)
    return written


def load_scene(directory):
    directory = Path(directory)
    meta_path = directory / 'meta.json'
    if not meta_path.is_file():
        raise DataError(f'no meta.json in {directory}')
    meta = json.loads(meta_path.read_text())
    spec = dict(meta['spec'])
    spec['classes'] = tuple(spec['classes'])
    rgb = read_rgb(directory / 'rgb.png')
    return Scene(
        rgb=rgb,
        depth=read_depth(directory / 'depth.pgm'),
        mask=read_mask(directory / 'mask.png'),
        spec=SceneSpec(**spec),
        mean_luma=mean_luma(rgb),
    )


def load_corpus(root):
    """Scenes grouped by seed (ascending), exposures brightest first"""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f'corpus directory not found: {root}')
    groups = []
    seed_dirs = sorted((p for p in root.iterdir() if p.is_dir() and p.name.isdigit()), key=lambda p: int(p.name))
    for seed_dir in seed_dirs:
        level_dirs = sorted((p for p in seed_dir.iterdir() if (p / 'meta.json').is_file()),
                            key=lambda p: float(p.name), reverse=True)
        if level_dirs:
            groups.append([load_scene(p) for p in level_dirs])
    if not groups:
        raise DataError(f'corpus {root} contains no scenes')
    return groups
