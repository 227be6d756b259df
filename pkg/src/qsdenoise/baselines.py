"""Classical comparison denoisers: 3x3 median and frequency-domain Gaussian.

The Gaussian low-pass filter works on the centered spectrum of the
unpadded image: gains are exp(-D^2 / (2 sigma^2)) with D the Euclidean
distance to the zero-frequency bin in index units, so the DC gain is
exactly 1 and constants pass through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qsdenoise.backend import kernels
from qsdenoise.errors import EmptyInput

DEFAULT_FREQ_SIGMA = 55.0


@dataclass(frozen=True)
class FreqFilterConfig:
    """Bandwidth of the frequency-domain Gaussian, in spectrum pixels."""

    sigma: float = DEFAULT_FREQ_SIGMA

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


def median_filter_3x3(img: np.ndarray) -> np.ndarray:
    """Median of each 3x3 neighborhood, replicate border padding."""
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise EmptyInput("empty image")
    padded = np.pad(img, 1, mode="edge")
    return kernels.median3x3(np.ascontiguousarray(padded))


def gaussian_lowpass_gains(
    shape: tuple[int, int], sigma: float
) -> np.ndarray:
    """The centered-spectrum gain mask exp(-D^2/(2 sigma^2))."""
    rows, cols = shape
    crow, ccol = rows // 2, cols // 2
    y, x = np.ogrid[-crow:rows - crow, -ccol:cols - ccol]
    d2 = x * x + y * y
    return np.exp(-d2 / (2.0 * sigma * sigma))


def gaussian_lowpass_freq(
    img: np.ndarray, cfg: FreqFilterConfig = FreqFilterConfig()
) -> np.ndarray:
    """Gaussian low-pass in the frequency domain; returns the real part."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise EmptyInput(f"image {img.shape} too small to filter")
    spectrum = np.fft.fftshift(np.fft.fft2(img))
    spectrum *= gaussian_lowpass_gains(img.shape, cfg.sigma)
    return np.real(np.fft.ifft2(np.fft.ifftshift(spectrum)))
