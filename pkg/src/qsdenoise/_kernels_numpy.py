"""Pure-numpy fallback kernels (QSDENOISE_BACKEND=numpy).

Mirror of _kernels_numba. The score maps loop over candidate positions
and call the very same scalar *_pair functions, which keeps map entries
bit-identical to scalar rescoring within this backend. Correct but much
slower on dense searches; see benchmarks/bench_backends.py.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _entropy_bits(counts, total):
    # sorted-count accumulation: a pure function of the count multiset,
    # which keeps NMI exactly symmetric and exactly 1 on identical inputs
    c = np.sort(counts[counts > 0])
    p = c / total
    return float(-(p * np.log2(p)).sum())


def nmi_pair(a_idx, b_idx, bins):
    """NMI in [0, 1] of two equally-shaped pre-binned index arrays."""
    n = a_idx.size
    joint = np.bincount(
        a_idx.ravel() * bins + b_idx.ravel(), minlength=bins * bins
    ).reshape(bins, bins)
    total = float(n)
    hx = _entropy_bits(joint.sum(axis=1), total)
    hy = _entropy_bits(joint.sum(axis=0), total)
    denom = hx + hy
    if denom == 0.0:
        # both windows constant after binning: identical bin scores 1
        return 1.0 if a_idx.flat[0] == b_idx.flat[0] else 0.0
    hxy = _entropy_bits(joint.ravel(), total)
    value = 2.0 * (hx + hy - hxy) / denom
    # keep rounding from leaking outside [0, 1]
    return min(max(value, 0.0), 1.0)


def nmi_score_map(ld_idx, nd_idx, bins):
    """NMI of ld_idx against every in-bounds window of nd_idx (stride 1)."""
    ph, pw = ld_idx.shape
    oh = nd_idx.shape[0] - ph + 1
    ow = nd_idx.shape[1] - pw + 1
    out = np.empty((oh, ow), np.float64)
    for r in range(oh):
        for c in range(ow):
            out[r, c] = nmi_pair(ld_idx, nd_idx[r:r + ph, c:c + pw], bins)
    return out


def pearson_pair(a, b):
    """Population Pearson correlation; NaN when either side is constant."""
    n = float(a.size)
    da = a - a.mean()
    db = b - b.mean()
    sab = float((da * db).sum())
    saa = float((da * da).sum())
    sbb = float((db * db).sum())
    if saa == 0.0 or sbb == 0.0:
        return np.nan
    r = (sab / n) / (np.sqrt(saa / n) * np.sqrt(sbb / n))
    # keep rounding from pushing |r| past 1
    return min(max(r, -1.0), 1.0)


def pearson_score_map(ld, nd):
    ph, pw = ld.shape
    oh = nd.shape[0] - ph + 1
    ow = nd.shape[1] - pw + 1
    out = np.empty((oh, ow), np.float64)
    for r in range(oh):
        for c in range(ow):
            out[r, c] = pearson_pair(ld, nd[r:r + ph, c:c + pw])
    return out


def rbf_pair(a, b, sigma):
    """exp(-||a - b||^2 / (2 sigma^2)) over all pixels."""
    d = a - b
    ssd = float((d * d).sum())
    return float(np.exp(-ssd / (2.0 * sigma * sigma)))


def rbf_score_map(ld, nd, sigma):
    ph, pw = ld.shape
    oh = nd.shape[0] - ph + 1
    ow = nd.shape[1] - pw + 1
    out = np.empty((oh, ow), np.float64)
    for r in range(oh):
        for c in range(ow):
            out[r, c] = rbf_pair(ld, nd[r:r + ph, c:c + pw], sigma)
    return out


def median3x3(padded):
    """3x3 median of a replicate-padded image; output drops the 1px border."""
    windows = sliding_window_view(padded, (3, 3))
    return np.median(windows, axis=(2, 3))
