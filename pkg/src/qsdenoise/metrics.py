"""Image quality metrics: MSE, PSNR and SSIM.

PSNR uses an explicit peak value (pass the volume's declared maximum,
not the observed one, so scores stay comparable across methods). SSIM
is computed from global whole-image statistics by default; a sliding
8x8 uniform-window variant is available for cross-checking against the
windowed convention.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from qsdenoise.errors import NonpositiveMax, NonpositiveRange, SizeMismatch

SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    ax = np.asarray(x, dtype=np.float64)
    ay = np.asarray(y, dtype=np.float64)
    if ax.shape != ay.shape:
        raise SizeMismatch(f"shapes differ: {ax.shape} vs {ay.shape}")
    return ax, ay


def mse(x, y) -> float:
    """Mean squared pixel difference."""
    ax, ay = _as_pair(x, y)
    d = ax - ay
    return float(np.mean(d * d))


def psnr(x, y, max_val: float) -> float:
    """Peak signal-to-noise ratio in dB; inf when the images are equal."""
    if not max_val > 0:
        raise NonpositiveMax(f"max_val must be > 0, got {max_val}")
    err = mse(x, y)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / err)


def _ssim_terms(x, y, c1, c2):
    mx = x.mean()
    my = y.mean()
    dx = x - mx
    dy = y - my
    vx = float((dx * dx).mean())
    vy = float((dy * dy).mean())
    cov = float((dx * dy).mean())
    num = (2.0 * mx * my + c1) * (2.0 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return num / den


def ssim(
    x,
    y,
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
    data_range: float = 1.0,
    windowed: bool = False,
    window: int = 8,
) -> float:
    """Structural similarity in [-1, 1], population moments.

    The cross term uses 2*cov (the convention under which ssim(x, x)
    is exactly 1). windowed=True averages the same statistic over all
    dense window-by-window positions instead of whole-image moments.
    """
    if not data_range > 0:
        raise NonpositiveRange(f"data_range must be > 0, got {data_range}")
    ax, ay = _as_pair(x, y)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    if not windowed:
        return float(_ssim_terms(ax, ay, c1, c2))
    if min(ax.shape) < window:
        raise SizeMismatch(f"image smaller than the {window}x{window} window")
    wx = sliding_window_view(ax, (window, window))
    wy = sliding_window_view(ay, (window, window))
    values = [
        _ssim_terms(wx[i, j], wy[i, j], c1, c2)
        for i in range(wx.shape[0])
        for j in range(wx.shape[1])
    ]
    return float(np.mean(values))
