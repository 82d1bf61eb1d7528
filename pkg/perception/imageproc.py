"""
Image processing kernels
Luminance statistics, Canny structure maps, Retinex decomposition and the
two-stage depth enhancement (bilateral smoothing + hole interpolation).

Images are numpy arrays: RGB is (H, W, 3) float in [0, 1], gray is (H, W)
float in [0, 1], binary masks are (H, W) bool. All functions are pure.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import DataError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
RETINEX_EPS = 1e-4


@dataclass(frozen=True)
class DepthMap:
    """Depth in metres plus a validity flag per pixel"""
    depth: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_array(cls, depth):
        depth = np.asarray(depth, dtype=np.float64)
        return cls(depth=depth, valid=np.isfinite(depth) & (depth > 0))

    @property
    def shape(self):
        return self.depth.shape

    @property
    def holes(self):
        """Invalid, non-positive or non-finite pixels"""
        with np.errstate(invalid='ignore'):
            return ~self.valid | ~np.isfinite(self.depth) | (self.depth <= 0)


@dataclass(frozen=True)
class HistogramDescriptor:
    """Normalized luminance CDF sampled at R uniform intensities"""
    values: np.ndarray
    mean_luma: float


@dataclass(frozen=True)
class RetinexDecomposition:
    luminance: np.ndarray
    structure: np.ndarray
    scale: float
    eps: float = RETINEX_EPS


def rgb_to_luma(img):
    """Rec. 601 luma of an RGB image"""
    img = np.asarray(img, dtype=np.float64)
    return np.clip(img @ LUMA_WEIGHTS, 0.0, 1.0)


def histogram_descriptor(gray, n_points):
    """values[i] = fraction of pixels with luma <= i / (n_points - 1)"""
    if n_points < 2:
        raise DataError(f'histogram needs at least 2 points, got {n_points}')
    gray = np.asarray(gray, dtype=np.float64)
    if gray.size == 0:
        raise DataError('cannot build a histogram descriptor of an empty image')
    ordered = np.sort(gray.ravel())
    thresholds = np.arange(n_points) / (n_points - 1)
    counts = np.searchsorted(ordered, thresholds, side='right')
    return HistogramDescriptor(
        values=counts / ordered.size,
        mean_luma=float(255.0 * gray.mean()),
    )


# (row, col) offsets of the positive gradient direction for the four
# quantized orientations 0, 45, 90 and 135 degrees
_NMS_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def _non_max_suppression(magnitude, angle):
    sector = (np.floor((np.mod(angle, 180.0) + 22.5) / 45.0).astype(int)) % 4
    padded = np.pad(magnitude, 1, mode='constant')
    h, w = magnitude.shape
    keep = np.zeros_like(magnitude, dtype=bool)
    for index, (dr, dc) in enumerate(_NMS_OFFSETS):
        ahead = padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        behind = padded[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        # strict on one side so plateaus two pixels wide give a one pixel line
        local = (magnitude > behind) & (magnitude >= ahead)
        keep |= (sector == index) & local
    return np.where(keep & (magnitude > 0), magnitude, 0.0)


def canny(gray, sigma=1.4, low=0.1, high=0.3):
    """
    Canny edge map with thresholds given as fractions of the max gradient.

    Gaussian smoothing, Sobel gradients, non-maximum suppression and
    hysteresis over 8-connected weak components.
    """
    if sigma <= 0:
        raise DataError(f'canny sigma must be positive, got {sigma}')
    if not 0 <= low < high <= 1:
        raise DataError(f'canny thresholds need 0 <= low < high <= 1, got {low}, {high}')
    gray = np.asarray(gray, dtype=np.float64)
    smoothed = ndimage.gaussian_filter(gray, sigma, mode='nearest')
    gx = ndimage.sobel(smoothed, axis=1, mode='nearest')
    gy = ndimage.sobel(smoothed, axis=0, mode='nearest')
    magnitude = np.hypot(gx, gy)
    max_grad = magnitude.max() if magnitude.size else 0.0
    if max_grad < 1e-12:
        return np.zeros(gray.shape, dtype=bool)

    thin = _non_max_suppression(magnitude, np.degrees(np.arctan2(gy, gx)))
    strong = thin >= high * max_grad
    weak = thin >= low * max_grad
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    anchored = np.unique(labels[strong])
    anchored = anchored[anchored > 0]
    return np.isin(labels, anchored) & weak


def retinex_decompose(img, sigma=15.0, eps=RETINEX_EPS):
    """
    Split an RGB image into a smooth luminance image and a structure map.

    Luminance is a per-channel Gaussian blur. Structure is the luma ratio
    luma(I) / (luma(I_L) + eps) divided by its maximum; the maximum is kept as
    `scale` so `reconstruct_luma` inverts the split exactly.
    """
    img = np.asarray(img, dtype=np.float64)
    luminance = ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0), mode='reflect')
    ratio = rgb_to_luma(img) / (luminance @ LUMA_WEIGHTS + eps)
    scale = float(ratio.max()) if ratio.size else 1.0
    if scale <= 0:
        scale = 1.0
    structure = np.clip(ratio / scale, 0.0, 1.0)
    return RetinexDecomposition(luminance=luminance, structure=structure, scale=scale, eps=eps)


def reconstruct_luma(decomposition):
    """Inverse of retinex_decompose on the luma plane"""
    base = decomposition.luminance @ LUMA_WEIGHTS + decomposition.eps
    return base * decomposition.structure * decomposition.scale


def _normalized_depth(depth, valid):
    values = depth[valid]
    low, high = float(values.min()), float(values.max())
    span = high - low
    if span > 0:
        normalized = np.where(valid, (depth - low) / span, 0.0)
    else:
        normalized = np.zeros_like(depth)
    return normalized, low, high, span


def _window_offsets(radius):
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            yield dy, dx


def _shift(array, dy, dx, radius, fill):
    """View of `array` displaced by (dy, dx), borders filled with `fill`"""
    padded = np.pad(array, radius, mode='constant', constant_values=fill)
    h, w = array.shape
    return padded[radius + dy:radius + dy + h, radius + dx:radius + dx + w]


def bilateral_filter(d, sigma_s=2.0, sigma_i=0.1, window=5):
    """
    Edge-preserving smoothing of valid depth.

    Depth is normalized to [0, 1] per map before the intensity kernel is
    applied and mapped back afterwards; holes neither contribute nor change.
    """
    if sigma_s <= 0 or sigma_i <= 0:
        raise DataError('bilateral sigmas must be positive')
    if window < 3 or window % 2 == 0:
        raise DataError(f'bilateral window must be odd and >= 3, got {window}')
    valid = ~d.holes
    if not valid.any():
        return DepthMap(depth=d.depth.copy(), valid=valid)

    depth = np.where(valid, d.depth, 0.0)
    normalized, low, high, span = _normalized_depth(depth, valid)
    radius = window // 2
    numerator = np.zeros_like(normalized)
    weights = np.zeros_like(normalized)
    for dy, dx in _window_offsets(radius):
        neighbour = _shift(normalized, dy, dx, radius, 0.0)
        neighbour_valid = _shift(valid, dy, dx, radius, False)
        w = (
            np.exp(-(dy * dy + dx * dx) / (2.0 * sigma_s ** 2))
            * np.exp(-((neighbour - normalized) ** 2) / (2.0 * sigma_i ** 2))
            * neighbour_valid
        )
        numerator += w * neighbour
        weights += w

    smoothed = np.divide(numerator, weights, out=np.zeros_like(numerator), where=valid)
    filtered = np.clip(low + smoothed * span, low, high)
    return DepthMap(depth=np.where(valid, filtered, d.depth), valid=valid)


def fill_holes(d, sigma_s=2.0, sigma_i=0.1):
    """
    Interpolate holes from surrounding valid depth.

    Each hole takes the mean of known neighbours weighted by
    exp(-|grad D|^2 / 2 sigma_i^2) * exp(-|p - q|^2 / 2 sigma_s^2), with the
    gradient taken on the normalized map. Holes are filled ring by ring from
    the valid region outwards, each pass using the 3x3 neighbourhood.
    """
    holes = d.holes
    if holes.all():
        raise DataError('depth map has no valid pixel to interpolate from')
    depth = np.where(holes, 0.0, d.depth)
    if not holes.any():
        return DepthMap(depth=depth, valid=np.ones_like(holes))

    normalized, _, _, _ = _normalized_depth(depth, ~holes)
    nearest = ndimage.distance_transform_edt(holes, return_distances=False, return_indices=True)
    grad_rows, grad_cols = np.gradient(normalized[nearest[0], nearest[1]])
    grad_weight = np.exp(-(grad_rows ** 2 + grad_cols ** 2) / (2.0 * sigma_i ** 2))

    values = depth.copy()
    known = ~holes
    radius = 1
    while not known.all():
        numerator = np.zeros_like(values)
        weights = np.zeros_like(values)
        plain_sum = np.zeros_like(values)
        plain_count = np.zeros_like(values)
        for dy, dx in _window_offsets(radius):
            neighbour_known = _shift(known, dy, dx, radius, False)
            neighbour = _shift(values, dy, dx, radius, 0.0)
            w = (
                _shift(grad_weight, dy, dx, radius, 0.0)
                * np.exp(-(dy * dy + dx * dx) / (2.0 * sigma_s ** 2))
                * neighbour_known
            )
            numerator += w * neighbour
            weights += w
            plain_sum += neighbour * neighbour_known
            plain_count += neighbour_known

        # every pass reaches at least one hole 8-adjacent to known depth
        fillable = ~known & (plain_count > 0)
        weighted = fillable & (weights > 0)
        # weights can underflow far from the valid region
        values[weighted] = numerator[weighted] / weights[weighted]
        fallback = fillable & ~weighted
        values[fallback] = plain_sum[fallback] / plain_count[fallback]
        known |= fillable

    return DepthMap(depth=values, valid=np.ones_like(holes))


def enhance_depth(d, sigma_s=2.0, sigma_i=0.1, window=5):
    """Two-stage depth enhancement: bilateral smoothing, then hole filling"""
    smoothed = bilateral_filter(d, sigma_s=sigma_s, sigma_i=sigma_i, window=window)
    return fill_holes(smoothed, sigma_s=sigma_s, sigma_i=sigma_i)
