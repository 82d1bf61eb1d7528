"""
Depth-optimal grasp search
Pick the largest garment region, take its k closest-to-camera pixels and grasp
the one nearest the region's bounding-rectangle centre; repeat per garment.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import GraspError

logger = logging.getLogger(__name__)

DEFAULT_K_FRACTION = 0.01
SUCCESS_DEPTH_TOLERANCE_M = 0.01


@dataclass(frozen=True)
class Region:
    """All pixels of one class, (area, 2) row/col array in row-major order"""
    class_id: int
    pixels: np.ndarray

    @property
    def area(self):
        return len(self.pixels)


@dataclass(frozen=True)
class GraspPoint:
    class_id: int
    pixel: tuple
    depth_m: float

    @property
    def row(self):
        return self.pixel[0]

    @property
    def col(self):
        return self.pixel[1]


def extract_regions(mask):
    """One region per non-background class present, ordered by class id"""
    mask = np.asarray(mask)
    return [
        Region(class_id=int(class_id), pixels=np.argwhere(mask == class_id))
        for class_id in np.unique(mask)
        if class_id != 0
    ]


def largest_region(regions):
    if not regions:
        raise GraspError('no garment region to grasp')
    return min(regions, key=lambda region: (-region.area, region.class_id))


def _linear_index(pixels, width):
    return pixels[:, 0] * width + pixels[:, 1]


def depth_top_k(region, d, k):
    """
    The min(k, valid) region pixels with the smallest depth, closest first;
    equal depths keep row-major order. Holes are excluded.
    """
    if k < 1:
        raise GraspError(f'k must be at least 1, got {k}')
    rows, cols = region.pixels[:, 0], region.pixels[:, 1]
    valid = ~d.holes[rows, cols]
    if not valid.any():
        raise GraspError(
            f'region of class {region.class_id} has no valid depth; fill holes before grasping'
        )
    candidates = region.pixels[valid]
    depths = d.depth[candidates[:, 0], candidates[:, 1]]
    order = np.lexsort((_linear_index(candidates, d.shape[1]), depths))
    return candidates[order[:k]]


def region_center(region):
    """Centre of the axis-aligned bounding rectangle, rounded half-down"""
    if region.area == 0:
        raise GraspError('empty region has no centre')
    low = region.pixels.min(axis=0)
    high = region.pixels.max(axis=0)
    return tuple(int(v) for v in (low + high) // 2)


def default_k(area, fraction=DEFAULT_K_FRACTION):
    return max(1, math.ceil(fraction * area))


def _nearest_to(candidates, center, width):
    dist2 = ((candidates - np.asarray(center)) ** 2).sum(axis=1)
    best = np.lexsort((_linear_index(candidates, width), dist2))[0]
    return tuple(int(v) for v in candidates[best])


def _check_shapes(mask, d):
    if np.shape(mask) != d.shape:
        raise GraspError(f'mask shape {np.shape(mask)} differs from depth shape {d.shape}')


def select_grasp_point(mask, d, k=None, k_fraction=DEFAULT_K_FRACTION):
    """Grasp point on the largest region; k defaults to 1% of its area"""
    _check_shapes(mask, d)
    region = largest_region(extract_regions(mask))
    if k is None:
        k = default_k(region.area, k_fraction)
    candidates = depth_top_k(region, d, k)
    row, col = _nearest_to(candidates, region_center(region), d.shape[1])
    return GraspPoint(region.class_id, (row, col), float(d.depth[row, col]))


def select_center_grasp_point(mask, d):
    """Baseline: region pixel nearest the bounding-rectangle centre, depth ignored"""
    _check_shapes(mask, d)
    region = largest_region(extract_regions(mask))
    row, col = _nearest_to(region.pixels, region_center(region), d.shape[1])
    return GraspPoint(region.class_id, (row, col), float(d.depth[row, col]))


def plan_grasp_sequence(mask, d, k=None, k_fraction=DEFAULT_K_FRACTION, selector=None):
    """
    Grasp the largest remaining garment, remove its class, repeat.
    `selector(mask, d)` replaces the depth-optimal choice when given.

    A garment whose pixels are all depth holes gets no depth-optimal grasp;
    it is logged and left out of the plan, so it scores as a failed grasp.
    """
    _check_shapes(mask, d)
    remaining = np.array(mask, copy=True)
    plan = []
    while (remaining != 0).any():
        region = largest_region(extract_regions(remaining))
        if selector is not None:
            plan.append(selector(remaining, d))
        elif d.holes[region.pixels[:, 0], region.pixels[:, 1]].all():
            logger.warning(
                'class %d has no valid depth under its %d pixels, skipped', region.class_id, region.area
            )
        else:
            plan.append(select_grasp_point(remaining, d, k=k, k_fraction=k_fraction))
        remaining[remaining == region.class_id] = 0
    return plan


def grasp_succeeds(point, true_mask, true_depth, tolerance=SUCCESS_DEPTH_TOLERANCE_M):
    """Right garment at the grasp pixel and depth within tolerance of the truth"""
    row, col = point.pixel
    if true_mask[row, col] != point.class_id or true_depth.holes[row, col]:
        return False
    return abs(point.depth_m - true_depth.depth[row, col]) < tolerance
