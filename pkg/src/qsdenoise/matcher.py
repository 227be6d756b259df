"""Slice-then-patch pairing of unpaired LD/ND volumes.

The workflow has three steps: find the best-matching ND slice for every
LD slice, find the best-matching ND patch (dense stride-1 search) for
every tiled LD patch inside that slice, and record each surviving pair
with its similarity score and the loss weight derived from it. Slice
matching trades match quality for speed and can be disabled, in which
case every LD patch searches every ND slice.

Determinism: candidate enumeration is canonical (ND volumes sorted by
id, slices ascending, positions row-major), ties keep the earliest
candidate, and worker-parallel runs merge results in task order, so a
manifest is byte-identical for any worker count.

Manifest file contract (consumed by external trainers):

    #qsmatch v1 p=<int> stride=<int> metric=<name[:params]> threshold=<float> topk=<int>
    ld_vol  ld_slice  ld_row  ld_col  nd_vol  nd_slice  nd_row  nd_col  score  weight

one tab-separated record per line, score and weight with 9 significant
digits in decimal notation.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

from qsdenoise.backend import kernels
from qsdenoise.errors import (
    DegenerateRange,
    DimensionMismatch,
    EmptyInput,
    EmptyTarget,
    MalformedManifest,
)
from qsdenoise.imgio import ImageVolume, tile_positions
from qsdenoise.similarity import (
    SimilarityMetric,
    bin_indices,
    weight_from_score,
)

MANIFEST_MAGIC = "#qsmatch v1"


@dataclass(frozen=True)
class SliceMatch:
    ld_volume_id: str
    ld_slice_index: int
    nd_volume_id: str
    nd_slice_index: int
    score: float


@dataclass(frozen=True)
class PatchMatch:
    ld_vol: str
    ld_slice: int
    ld_row: int
    ld_col: int
    nd_vol: str
    nd_slice: int
    nd_row: int
    nd_col: int
    p: int
    metric: SimilarityMetric
    score: float
    weight: float


@dataclass(frozen=True)
class MatchConfig:
    patch_size: int = 64
    stride: int | None = None  # None means non-overlapping (= patch_size)
    metric: SimilarityMetric = field(
        default_factory=SimilarityMetric.nmi_metric
    )
    threshold: float = 0.1
    top_k: int = 1
    slice_match_enabled: bool = True

    def __post_init__(self):
        if self.patch_size < 2:
            raise ValueError("patch_size must be >= 2")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    @property
    def effective_stride(self) -> int:
        return self.patch_size if self.stride is None else self.stride


@dataclass(frozen=True)
class PairManifest:
    p: int
    stride: int
    metric: SimilarityMetric
    threshold: float
    top_k: int
    records: tuple[PatchMatch, ...]
    dataset_fingerprint: str = ""

    @property
    def is_empty(self) -> bool:
        return len(self.records) == 0

    def mean_weight(self) -> float:
        if self.is_empty:
            raise EmptyInput("manifest holds no records")
        return float(np.mean([r.weight for r in self.records]))


@dataclass(frozen=True)
class ScoreHistogram:
    bins: int
    counts: np.ndarray
    mean: float
    mode_bin: int

    def edges(self, i: int) -> tuple[float, float]:
        return (i / self.bins, (i + 1) / self.bins)

    @property
    def mode_center(self) -> float:
        lo, hi = self.edges(self.mode_bin)
        return (lo + hi) / 2.0


# ------------------------------------------------------------ scoring


def shared_range(volumes: Sequence[ImageVolume]) -> tuple[float, float]:
    """Union of the declared intensity ranges (the shared NMI binning)."""
    if not volumes:
        raise EmptyTarget("no volumes supplied")
    return (
        min(v.intensity_min for v in volumes),
        max(v.intensity_max for v in volumes),
    )


def _prepare(pixels: np.ndarray, metric: SimilarityMetric, value_range):
    """Per-slice precomputation: bin once for NMI, cast once otherwise."""
    if metric.kind == "nmi":
        if value_range is None:
            raise DegenerateRange("nmi matching needs a value_range")
        return np.ascontiguousarray(bin_indices(pixels, metric.bins, value_range))
    return np.ascontiguousarray(pixels, dtype=np.float64)


def _pair_score(a_prep, b_prep, metric: SimilarityMetric) -> float:
    if metric.kind == "nmi":
        return float(kernels.nmi_pair(a_prep, b_prep, metric.bins))
    if metric.kind == "pearson":
        return float(kernels.pearson_pair(a_prep, b_prep))
    return float(kernels.rbf_pair(a_prep, b_prep, metric.sigma))


def _score_map(ld_prep, nd_prep, metric: SimilarityMetric) -> np.ndarray:
    if metric.kind == "nmi":
        return kernels.nmi_score_map(ld_prep, nd_prep, metric.bins)
    if metric.kind == "pearson":
        return kernels.pearson_score_map(ld_prep, nd_prep)
    return kernels.rbf_score_map(ld_prep, nd_prep, metric.sigma)


def _sorted_by_id(volumes: Sequence[ImageVolume]) -> list[ImageVolume]:
    return sorted(volumes, key=lambda v: v.id)


# ------------------------------------------------------- slice matching


def match_slices(
    ld: ImageVolume,
    nd_set: Sequence[ImageVolume],
    metric: SimilarityMetric,
    value_range: tuple[float, float] | None = None,
) -> list[SliceMatch]:
    """Best-scoring ND slice for every LD slice, over the whole ND set.

    Ties keep the lexicographically lowest ND volume id, then the lowest
    slice index. Candidates whose score is undefined (constant slices
    under pearson) are skipped.
    """
    nd_sorted = _sorted_by_id(nd_set)
    if not nd_sorted or all(v.num_slices == 0 for v in nd_sorted):
        raise EmptyTarget("ND set holds no slices")
    shape = (ld.height, ld.width)
    for v in nd_sorted:
        if (v.height, v.width) != shape:
            raise DimensionMismatch(
                f"{v.id} is {v.height}x{v.width}, LD slices are {shape}"
            )
    if value_range is None and metric.kind == "nmi":
        value_range = shared_range([ld, *nd_sorted])
    targets = [
        (v.id, s, _prepare(v.slices[s], metric, value_range))
        for v in nd_sorted
        for s in range(v.num_slices)
    ]
    matches = []
    for s in range(ld.num_slices):
        ld_prep = _prepare(ld.slices[s], metric, value_range)
        best = None
        for vid, nd_s, nd_prep in targets:
            score = _pair_score(ld_prep, nd_prep, metric)
            if np.isnan(score):
                continue
            if best is None or score > best[0]:
                best = (score, vid, nd_s)
        if best is None:
            raise EmptyTarget(f"no scoreable ND slice for LD slice {s}")
        matches.append(
            SliceMatch(
                ld_volume_id=ld.id,
                ld_slice_index=s,
                nd_volume_id=best[1],
                nd_slice_index=best[2],
                score=best[0],
            )
        )
    return matches


# ------------------------------------------------------- patch matching


def _patch_records(
    ld_pixels: np.ndarray,
    ld_vol_id: str,
    ld_slice_index: int,
    targets: list[tuple[str, int, np.ndarray]],
    cfg: MatchConfig,
    value_range,
) -> list[PatchMatch]:
    """Search every tiled LD patch of one slice against prepared targets.

    targets must already be in canonical (volume id, slice) order; the
    stable ranking then breaks score ties toward the earliest candidate
    in row-major order.
    """
    metric = cfg.metric
    p = cfg.patch_size
    ld_prep = _prepare(ld_pixels, metric, value_range)
    h, w = ld_pixels.shape
    records: list[PatchMatch] = []
    for r, c in tile_positions(h, w, p, cfg.effective_stride):
        ld_patch = ld_prep[r:r + p, c:c + p]
        flat_scores = []
        coords = []  # (target_index, rows per map, cols per map)
        for t_index, (_, _, nd_prep) in enumerate(targets):
            score_map = _score_map(ld_patch, nd_prep, metric)
            flat_scores.append(score_map.ravel())
            coords.append((t_index, score_map.shape[1]))
        scores_all = np.concatenate(flat_scores)
        offsets = np.cumsum([0] + [len(f) for f in flat_scores])
        order = np.argsort(-scores_all, kind="stable")
        taken = 0
        for flat_index in order:
            if taken >= cfg.top_k:
                break
            score = float(scores_all[flat_index])
            if np.isnan(score):
                break  # NaNs sort to the end; nothing scoreable remains
            t_index = int(np.searchsorted(offsets, flat_index, side="right")) - 1
            local = int(flat_index - offsets[t_index])
            map_width = coords[t_index][1]
            nd_vol, nd_slice, _ = targets[t_index]
            weight = weight_from_score(score, metric)
            taken += 1
            if weight < cfg.threshold:
                continue  # ranked but below the bar: candidate still consumed
            records.append(
                PatchMatch(
                    ld_vol=ld_vol_id,
                    ld_slice=ld_slice_index,
                    ld_row=r,
                    ld_col=c,
                    nd_vol=nd_vol,
                    nd_slice=nd_slice,
                    nd_row=local // map_width,
                    nd_col=local % map_width,
                    p=p,
                    metric=metric,
                    score=score,
                    weight=weight,
                )
            )
    return records


def match_patches(
    ld_slice: np.ndarray,
    nd_slice: np.ndarray,
    cfg: MatchConfig,
    value_range: tuple[float, float] | None = None,
    ld_vol: str = "ld",
    ld_slice_index: int = 0,
    nd_vol: str = "nd",
    nd_slice_index: int = 0,
) -> list[PatchMatch]:
    """Dense search of one ND slice for every tiled LD patch."""
    ld_slice = np.asarray(ld_slice, dtype=np.float64)
    nd_slice = np.asarray(nd_slice, dtype=np.float64)
    if ld_slice.shape != nd_slice.shape:
        raise DimensionMismatch(
            f"slice shapes differ: {ld_slice.shape} vs {nd_slice.shape}"
        )
    targets = [
        (nd_vol, nd_slice_index, _prepare(nd_slice, cfg.metric, value_range))
    ]
    return _patch_records(
        ld_slice, ld_vol, ld_slice_index, targets, cfg, value_range
    )


def build_manifest(
    ld_set: Sequence[ImageVolume],
    nd_set: Sequence[ImageVolume],
    cfg: MatchConfig,
    workers: int = 1,
) -> PairManifest:
    """Run the full pairing workflow and collect the weighted manifest.

    With slice matching enabled each LD slice searches only its
    best-matched ND slice; otherwise every LD patch searches the entire
    ND set. Results are independent of the worker count.
    """
    ld_sorted = _sorted_by_id(ld_set)
    nd_sorted = _sorted_by_id(nd_set)
    if not ld_sorted or not nd_sorted:
        raise EmptyTarget("need at least one LD and one ND volume")
    shape = (ld_sorted[0].height, ld_sorted[0].width)
    for v in [*ld_sorted, *nd_sorted]:
        if (v.height, v.width) != shape:
            raise DimensionMismatch(
                f"{v.id} is {v.height}x{v.width}, expected {shape[0]}x{shape[1]}"
            )
    value_range = None
    if cfg.metric.kind == "nmi":
        value_range = shared_range([*ld_sorted, *nd_sorted])

    prepared = {
        (v.id, s): _prepare(v.slices[s], cfg.metric, value_range)
        for v in nd_sorted
        for s in range(v.num_slices)
    }
    all_targets = [
        (v.id, s, prepared[(v.id, s)])
        for v in nd_sorted
        for s in range(v.num_slices)
    ]

    target_for: dict[tuple[str, int], list] = {}
    if cfg.slice_match_enabled:
        for ld_vol in ld_sorted:
            for sm in match_slices(
                ld_vol, nd_sorted, cfg.metric, value_range=value_range
            ):
                key = (sm.nd_volume_id, sm.nd_slice_index)
                target_for[(sm.ld_volume_id, sm.ld_slice_index)] = [
                    (sm.nd_volume_id, sm.nd_slice_index, prepared[key])
                ]
    else:
        for ld_vol in ld_sorted:
            for s in range(ld_vol.num_slices):
                target_for[(ld_vol.id, s)] = all_targets

    tasks = [
        (ld_vol, s)
        for ld_vol in ld_sorted
        for s in range(ld_vol.num_slices)
    ]

    def run(task):
        ld_vol, s = task
        return _patch_records(
            ld_vol.slices[s],
            ld_vol.id,
            s,
            target_for[(ld_vol.id, s)],
            cfg,
            value_range,
        )

    if workers <= 1:
        chunks = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, tasks))

    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.ld_vol, r.ld_slice, r.ld_row, r.ld_col))
    return PairManifest(
        p=cfg.patch_size,
        stride=cfg.effective_stride,
        metric=cfg.metric,
        threshold=cfg.threshold,
        top_k=cfg.top_k,
        records=tuple(records),
        dataset_fingerprint=_fingerprint([*ld_sorted, *nd_sorted]),
    )


def _fingerprint(volumes: Sequence[ImageVolume]) -> str:
    digest = hashlib.sha256()
    for v in volumes:
        digest.update(
            f"{v.id}:{v.num_slices}x{v.height}x{v.width}:"
            f"{v.intensity_min!r}:{v.intensity_max!r};".encode()
        )
    return digest.hexdigest()[:16]


# ------------------------------------------------------------ histogram


def truly_paired_scores(
    ld: ImageVolume,
    nd: ImageVolume,
    cfg: MatchConfig,
    value_range: tuple[float, float] | None = None,
) -> list[float]:
    """Similarity of co-located patches in two aligned (paired) volumes."""
    if (ld.height, ld.width, ld.num_slices) != (nd.height, nd.width, nd.num_slices):
        raise DimensionMismatch("paired volumes must share all dimensions")
    if value_range is None and cfg.metric.kind == "nmi":
        value_range = shared_range([ld, nd])
    scores = []
    p = cfg.patch_size
    for s in range(ld.num_slices):
        ld_prep = _prepare(ld.slices[s], cfg.metric, value_range)
        nd_prep = _prepare(nd.slices[s], cfg.metric, value_range)
        for r, c in tile_positions(ld.height, ld.width, p, cfg.effective_stride):
            score = _pair_score(
                ld_prep[r:r + p, c:c + p], nd_prep[r:r + p, c:c + p], cfg.metric
            )
            if not np.isnan(score):
                scores.append(score)
    return scores


def nmi_histogram(scores_or_matches, bins: int = 20) -> ScoreHistogram:
    """Fixed-range [0, 1] histogram of match scores.

    Accepts raw score values or PatchMatch records. Values are clamped
    into [0, 1]; the mode is the lowest-index maximal bin.
    """
    values = [
        m.score if isinstance(m, PatchMatch) else float(m)
        for m in scores_or_matches
    ]
    if not values:
        raise EmptyInput("no scores to bin")
    arr = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    idx = np.minimum(np.floor(arr * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return ScoreHistogram(
        bins=bins,
        counts=counts,
        mean=float(arr.mean()),
        mode_bin=int(np.argmax(counts)),
    )


# ------------------------------------------------------------ file IO


def _fmt9(x: float) -> str:
    """9 significant digits, positional decimal notation."""
    return format(Decimal(f"{x:.8e}"), "f")


def write_manifest(manifest: PairManifest, path: str | Path) -> None:
    lines = [
        f"{MANIFEST_MAGIC} p={manifest.p} stride={manifest.stride} "
        f"metric={manifest.metric.descriptor()} "
        f"threshold={manifest.threshold!r} topk={manifest.top_k}"
    ]
    for r in manifest.records:
        lines.append(
            "\t".join(
                [
                    r.ld_vol,
                    str(r.ld_slice),
                    str(r.ld_row),
                    str(r.ld_col),
                    r.nd_vol,
                    str(r.nd_slice),
                    str(r.nd_row),
                    str(r.nd_col),
                    _fmt9(r.score),
                    _fmt9(r.weight),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> PairManifest:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(MANIFEST_MAGIC + " "):
        raise MalformedManifest(f"{path} lacks the '{MANIFEST_MAGIC}' header")
    header: dict[str, str] = {}
    for token in lines[0][len(MANIFEST_MAGIC):].split():
        key, _, value = token.partition("=")
        if not value:
            raise MalformedManifest(f"bad header token {token!r}")
        header[key] = value
    try:
        p = int(header["p"])
        stride = int(header["stride"])
        metric = SimilarityMetric.from_descriptor(header["metric"])
        threshold = float(header["threshold"])
        top_k = int(header["topk"])
    except (KeyError, ValueError) as exc:
        raise MalformedManifest(f"bad manifest header in {path}: {exc}") from exc
    records = []
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != 10:
            raise MalformedManifest(f"record needs 10 fields, got {len(parts)}")
        try:
            records.append(
                PatchMatch(
                    ld_vol=parts[0],
                    ld_slice=int(parts[1]),
                    ld_row=int(parts[2]),
                    ld_col=int(parts[3]),
                    nd_vol=parts[4],
                    nd_slice=int(parts[5]),
                    nd_row=int(parts[6]),
                    nd_col=int(parts[7]),
                    p=p,
                    metric=metric,
                    score=float(parts[8]),
                    weight=float(parts[9]),
                )
            )
        except ValueError as exc:
            raise MalformedManifest(f"bad record line {ln!r}") from exc
    return PairManifest(
        p=p,
        stride=stride,
        metric=metric,
        threshold=threshold,
        top_k=top_k,
        records=tuple(records),
    )
