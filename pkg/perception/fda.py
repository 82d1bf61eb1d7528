"""
Fourier domain adaptation
Swap the low-frequency amplitude of a source image for a target's while
keeping the source phase.
"""
from dataclasses import dataclass

import numpy as np
from scipy import fft
from sklearn.utils import check_random_state

from .exceptions import DataError


@dataclass(frozen=True)
class Spectrum:
    """Per-channel DC-centred amplitude and phase, (H, W, c) each"""
    amplitude: np.ndarray
    phase: np.ndarray

    @property
    def height(self):
        return self.amplitude.shape[0]

    @property
    def width(self):
        return self.amplitude.shape[1]


def _channels(image):
    image = np.asarray(image, dtype=np.float64)
    return image[..., None] if image.ndim == 2 else image


def to_spectrum(image):
    coefficients = fft.fftshift(fft.fft2(_channels(image), axes=(0, 1)), axes=(0, 1))
    return Spectrum(amplitude=np.abs(coefficients), phase=np.angle(coefficients))


def from_spectrum(spectrum):
    coefficients = spectrum.amplitude * np.exp(1j * spectrum.phase)
    return np.real(fft.ifft2(fft.ifftshift(coefficients, axes=(0, 1)), axes=(0, 1)))


def low_frequency_window(height, width, beta):
    """Row and column slices of the centred (2b+1)-sided square, b = floor(beta * min(H, W))"""
    half = int(np.floor(beta * min(height, width)))
    cy, cx = height // 2, width // 2
    return (
        slice(max(cy - half, 0), min(cy + half + 1, height)),
        slice(max(cx - half, 0), min(cx + half + 1, width)),
    )


def fda_transfer(source, target, beta=0.01, clip=True):
    """
    Source image restyled with the target's low-frequency amplitude.
    beta = 0 returns the source unchanged.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape:
        raise DataError(f'source {source.shape} and target {target.shape} differ in shape')
    if not 0 <= beta <= 0.5:
        raise DataError(f'beta must lie in [0, 0.5], got {beta}')
    if beta == 0:
        return source.copy()

    src, trg = to_spectrum(source), to_spectrum(target)
    rows, cols = low_frequency_window(src.height, src.width, beta)
    amplitude = src.amplitude.copy()
    amplitude[rows, cols] = trg.amplitude[rows, cols]
    out = from_spectrum(Spectrum(amplitude=amplitude, phase=src.phase)).reshape(source.shape)
    return np.clip(out, 0.0, 1.0) if clip else out


def fda_batch(sources, targets, beta=0.01, seed=0):
    """Each source against a target drawn uniformly from the style pool"""
    if not targets:
        raise DataError('target style pool is empty')
    rng = check_random_state(seed)
    picks = rng.randint(0, len(targets), size=len(sources))
    return [fda_transfer(src, targets[i], beta) for src, i in zip(sources, picks)], picks.tolist()
