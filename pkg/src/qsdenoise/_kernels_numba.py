"""Numba-compiled inner loops (default backend).

Mirror of _kernels_numpy: same function names, same signatures, same
per-pair arithmetic. The scalar *_pair functions and the dense score
maps share one code path, so a score looked up in a map is bit-identical
to rescoring the same two windows through the scalar API.

All kernels are nogil so the matcher's thread pool gets real parallelism.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _entropy_sorted(counts, m, total):
    """Entropy in bits of counts[:m], accumulated in sorted-count order.

    The canonical order makes each entropy a pure function of the count
    multiset, so NMI is exactly symmetric (transposing the joint keeps
    all three multisets) and exactly 1 for identical inputs (a diagonal
    joint shares its multiset with both marginals).
    """
    ordered = np.sort(counts[:m])
    h = 0.0
    for t in range(m):
        p = ordered[t] / total
        h -= p * np.log2(p)
    return h


@njit(**_JIT)
def _nmi_on_scratch(a_idx, b_idx, bins, joint, row_c, col_c, touched, cbuf):
    # joint/row_c/col_c must arrive zeroed; they are re-zeroed before return.
    h, w = a_idx.shape
    n = h * w
    ntouch = 0
    for i in range(h):
        for j in range(w):
            ia = a_idx[i, j]
            ib = b_idx[i, j]
            if joint[ia, ib] == 0:
                touched[ntouch] = ia * bins + ib
                ntouch += 1
            joint[ia, ib] += 1
            row_c[ia] += 1
            col_c[ib] += 1
    total = float(n)
    nx = 0
    for i in range(bins):
        if row_c[i] > 0:
            cbuf[nx] = row_c[i]
            nx += 1
    hx = _entropy_sorted(cbuf, nx, total)
    ny = 0
    for i in range(bins):
        if col_c[i] > 0:
            cbuf[ny] = col_c[i]
            ny += 1
    hy = _entropy_sorted(cbuf, ny, total)
    for t in range(ntouch):
        cbuf[t] = joint[touched[t] // bins, touched[t] % bins]
    hxy = _entropy_sorted(cbuf, ntouch, total)
    for t in range(ntouch):
        joint[touched[t] // bins, touched[t] % bins] = 0
    for i in range(bins):
        row_c[i] = 0
        col_c[i] = 0
    denom = hx + hy
    if denom == 0.0:
        # both windows constant after binning: identical bin scores 1
        return 1.0 if a_idx[0, 0] == b_idx[0, 0] else 0.0
    value = 2.0 * (hx + hy - hxy) / denom
    # keep rounding from leaking outside [0, 1]
    if value < 0.0:
        return 0.0
    if value > 1.0:
        return 1.0
    return value


@njit(**_JIT)
def nmi_pair(a_idx, b_idx, bins):
    """NMI in [0, 1] of two equally-shaped pre-binned index arrays."""
    joint = np.zeros((bins, bins), np.int64)
    row_c = np.zeros(bins, np.int64)
    col_c = np.zeros(bins, np.int64)
    touched = np.empty(a_idx.size, np.int64)
    cbuf = np.empty(a_idx.size, np.int64)
    return _nmi_on_scratch(
        a_idx, b_idx, bins, joint, row_c, col_c, touched, cbuf
    )


@njit(**_JIT)
def nmi_score_map(ld_idx, nd_idx, bins):
    """NMI of ld_idx against every in-bounds window of nd_idx (stride 1)."""
    ph, pw = ld_idx.shape
    oh = nd_idx.shape[0] - ph + 1
    ow = nd_idx.shape[1] - pw + 1
    out = np.empty((oh, ow), np.float64)
    joint = np.zeros((bins, bins), np.int64)
    row_c = np.zeros(bins, np.int64)
    col_c = np.zeros(bins, np.int64)
    touched = np.empty(ld_idx.size, np.int64)
    cbuf = np.empty(ld_idx.size, np.int64)
    for r in range(oh):
        for c in range(ow):
            out[r, c] = _nmi_on_scratch(
                ld_idx, nd_idx[r:r + ph, c:c + pw], bins,
                joint, row_c, col_c, touched, cbuf,
            )
    return out


@njit(**_JIT)
def pearson_pair(a, b):
    """Population Pearson correlation; NaN when either side is constant."""
    h, w = a.shape
    n = float(a.size)
    sa = 0.0
    sb = 0.0
    for i in range(h):
        for j in range(w):
            sa += a[i, j]
            sb += b[i, j]
    ma = sa / n
    mb = sb / n
    sab = 0.0
    saa = 0.0
    sbb = 0.0
    for i in range(h):
        for j in range(w):
            da = a[i, j] - ma
            db = b[i, j] - mb
            sab += da * db
            saa += da * da
            sbb += db * db
    if saa == 0.0 or sbb == 0.0:
        return np.nan
    r = (sab / n) / (np.sqrt(saa / n) * np.sqrt(sbb / n))
    # keep rounding from pushing |r| past 1
    if r > 1.0:
        return 1.0
    if r < -1.0:
        return -1.0
    return r


@njit(**_JIT)
def pearson_score_map(ld, nd):
    ph, pw = ld.shape
    oh = nd.shape[0] - ph + 1
    ow = nd.shape[1] - pw + 1
    out = np.empty((oh, ow), np.float64)
    for r in range(oh):
        for c in range(ow):
            out[r, c] = pearson_pair(ld, nd[r:r + ph, c:c + pw])
    return out


@njit(**_JIT)
def rbf_pair(a, b, sigma):
    """exp(-||a - b||^2 / (2 sigma^2)) over all pixels."""
    h, w = a.shape
    ssd = 0.0
    for i in range(h):
        for j in range(w):
            d = a[i, j] - b[i, j]
            ssd += d * d
    return np.exp(-ssd / (2.0 * sigma * sigma))


@njit(**_JIT)
def rbf_score_map(ld, nd, sigma):
    ph, pw = ld.shape
    oh = nd.shape[0] - ph + 1
    ow = nd.shape[1] - pw + 1
    out = np.empty((oh, ow), np.float64)
    for r in range(oh):
        for c in range(ow):
            out[r, c] = rbf_pair(ld, nd[r:r + ph, c:c + pw], sigma)
    return out


@njit(**_JIT)
def median3x3(padded):
    """3x3 median of a replicate-padded image; output drops the 1px border."""
    h = padded.shape[0] - 2
    w = padded.shape[1] - 2
    out = np.empty((h, w), np.float64)
    buf = np.empty(9, np.float64)
    for i in range(h):
        for j in range(w):
            t = 0
            for di in range(3):
                for dj in range(3):
                    buf[t] = padded[i + di, j + dj]
                    t += 1
            for u in range(1, 9):
                key = buf[u]
                v = u - 1
                while v >= 0 and buf[v] > key:
                    buf[v + 1] = buf[v]
                    v -= 1
                buf[v + 1] = key
            out[i, j] = buf[4]
    return out
