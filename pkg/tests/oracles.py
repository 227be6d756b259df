"""Independent brute-force reimplementations used as test oracles.

Everything here is deliberately written with plain Python loops, dicts,
and math.fsum so it shares no code path (and no summation order) with
the package implementations it checks.
"""

from __future__ import annotations

import math
from collections import Counter


def bf_bin(v: float, lo: float, hi: float, bins: int) -> int:
    if v < lo:
        v = lo
    if v > hi:
        v = hi
    idx = int(math.floor((v - lo) / (hi - lo) * bins))
    return min(idx, bins - 1)


def bf_nmi(a, b, bins: int, lo: float, hi: float) -> float:
    """NMI via the direct mutual-information sum over joint cells."""
    xs = [bf_bin(float(v), lo, hi, bins) for row in a for v in row]
    ys = [bf_bin(float(v), lo, hi, bins) for row in b for v in row]
    n = len(xs)
    joint = Counter(zip(xs, ys))
    cx = Counter(xs)
    cy = Counter(ys)

    def entropy(counter):
        return -math.fsum(
            (c / n) * math.log2(c / n) for c in counter.values()
        )

    hx = entropy(cx)
    hy = entropy(cy)
    if hx + hy == 0.0:
        return 1.0 if xs[0] == ys[0] else 0.0
    info = math.fsum(
        (c / n) * math.log2((c / n) / ((cx[x] / n) * (cy[y] / n)))
        for (x, y), c in joint.items()
    )
    return 2.0 * info / (hx + hy)


def bf_pearson(a, b) -> float:
    xs = [float(v) for row in a for v in row]
    ys = [float(v) for row in b for v in row]
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
    sx = math.sqrt(math.fsum((x - mx) ** 2 for x in xs) / n)
    sy = math.sqrt(math.fsum((y - my) ** 2 for y in ys) / n)
    return cov / (sx * sy)


def bf_rbf(a, b, sigma: float) -> float:
    xs = [float(v) for row in a for v in row]
    ys = [float(v) for row in b for v in row]
    ssd = math.fsum((x - y) ** 2 for x, y in zip(xs, ys))
    return math.exp(-ssd / (2.0 * sigma * sigma))


def bf_median3x3(img) -> list[list[float]]:
    """Per-pixel sorted-neighborhood median with replicate borders."""
    h = len(img)
    w = len(img[0])
    out = [[0.0] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            neighborhood = []
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii = min(max(i + di, 0), h - 1)
                    jj = min(max(j + dj, 0), w - 1)
                    neighborhood.append(float(img[ii][jj]))
            out[i][j] = sorted(neighborhood)[4]
    return out


def bf_match_slices(ld, nd_vols, metric, value_range):
    """Exhaustive slice matching: strict argmax over canonical order."""
    from qsdenoise.errors import ZeroVariance
    from qsdenoise.similarity import similarity

    results = []
    for s in range(ld.num_slices):
        best = None
        for vol in sorted(nd_vols, key=lambda v: v.id):
            for ns in range(vol.num_slices):
                try:
                    score = similarity(
                        ld.slices[s], vol.slices[ns], metric, value_range
                    )
                except ZeroVariance:
                    continue
                if best is None or score > best[0]:
                    best = (score, vol.id, ns)
        results.append((ld.id, s, best[1], best[2], best[0]))
    return results


def bf_build_manifest(ld_vols, nd_vols, cfg, slice_match=False):
    """Single-threaded exhaustive patch search, spec ranking rules.

    Returns record tuples (ld_vol, ld_slice, ld_row, ld_col, nd_vol,
    nd_slice, nd_row, nd_col, score, weight) in manifest order. Shares
    only the scalar similarity function with the implementation; all
    search, ranking, tie-break and threshold logic is reimplemented.
    """
    from qsdenoise.errors import ZeroVariance
    from qsdenoise.similarity import similarity, weight_from_score

    value_range = None
    if cfg.metric.kind == "nmi":
        value_range = (
            min(v.intensity_min for v in [*ld_vols, *nd_vols]),
            max(v.intensity_max for v in [*ld_vols, *nd_vols]),
        )
    nd_sorted = sorted(nd_vols, key=lambda v: v.id)
    p = cfg.patch_size
    stride = cfg.effective_stride
    records = []
    for ld in sorted(ld_vols, key=lambda v: v.id):
        slice_targets = None
        if slice_match:
            slice_targets = {
                s: (vid, ns)
                for _, s, vid, ns, _ in bf_match_slices(
                    ld, nd_sorted, cfg.metric, value_range
                )
            }
        for s in range(ld.num_slices):
            if slice_match:
                targets = [slice_targets[s]]
            else:
                targets = [
                    (vol.id, ns)
                    for vol in nd_sorted
                    for ns in range(vol.num_slices)
                ]
            by_id = {vol.id: vol for vol in nd_sorted}
            height, width = ld.height, ld.width
            for r in range(0, height - p + 1, stride):
                for c in range(0, width - p + 1, stride):
                    x = ld.slices[s][r:r + p, c:c + p]
                    candidates = []
                    for vid, ns in targets:
                        nd_slice = by_id[vid].slices[ns]
                        for nr in range(nd_slice.shape[0] - p + 1):
                            for nc in range(nd_slice.shape[1] - p + 1):
                                try:
                                    score = similarity(
                                        x,
                                        nd_slice[nr:nr + p, nc:nc + p],
                                        cfg.metric,
                                        value_range,
                                    )
                                except ZeroVariance:
                                    continue
                                candidates.append((score, vid, ns, nr, nc))
                    candidates.sort(key=lambda t: -t[0])  # stable on ties
                    for score, vid, ns, nr, nc in candidates[: cfg.top_k]:
                        weight = weight_from_score(score, cfg.metric)
                        if weight >= cfg.threshold:
                            records.append(
                                (ld.id, s, r, c, vid, ns, nr, nc, score, weight)
                            )
    return records


def bf_ssim_global(x, y, k1: float, k2: float, data_range: float) -> float:
    xs = [float(v) for row in x for v in row]
    ys = [float(v) for row in y for v in row]
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    vx = math.fsum((v - mx) ** 2 for v in xs) / n
    vy = math.fsum((v - my) ** 2 for v in ys) / n
    cov = math.fsum((u - mx) * (v - my) for u, v in zip(xs, ys)) / n
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    return ((2 * mx * my + c1) * (2 * cov + c2)) / (
        (mx * mx + my * my + c1) * (vx + vy + c2)
    )
