"""
Small configurations and in-memory corpora shared by the test modules
"""
import numpy as np

from perception.config import load_config
from perception.synth import degrade, generate_scene, random_spec

TINY = {
    'n_curves': 4,
    'n_points': 32,
    'channels': 4,
    'patch': 4,
    'epochs': 2,
    'retinex_sigma': 4.0,
    'scene_width': 32,
    'scene_height': 32,
    'num_scenes': 3,
    'levels': '1.0,0.7',
    'max_garments': 2,
}


def tiny_config(**overrides):
    return load_config(overrides={**TINY, **overrides})


def scene_groups(seeds, levels=(1.0, 0.7), size=32, max_garments=2):
    """Exposure groups of synthetic scenes, brightest first"""
    groups = []
    for seed in seeds:
        base = generate_scene(random_spec(seed, size, size, max_garments))
        groups.append([degrade(base, level) for level in levels])
    return groups


def numeric_gradient(loss_fn, array, step=1e-6):
    """Central differences of a scalar `loss_fn()` w.r.t. every entry of `array` (perturbed in place)"""
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + step
        plus = loss_fn()
        array[index] = original - step
        minus = loss_fn()
        array[index] = original
        grad[index] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic, numeric):
    scale = max(np.abs(numeric).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)
