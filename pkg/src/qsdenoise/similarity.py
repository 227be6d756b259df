"""Similarity measures between equally-sized patches.

Three measures are available: normalized mutual information (NMI),
Pearson correlation, and a radial basis function of the pixel-space
distance. NMI and RBF scores already live in [0, 1] and double as pair
weights; Pearson scores are clamped at zero when used for weighting.

Entropies are in bits (log base 2); NMI itself is base-invariant. NMI
bins over an explicit intensity range shared by both inputs, normally
the declared range of the source volumes, so flat patches and the
dataset-wide score distribution stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qsdenoise.backend import kernels
from qsdenoise.errors import (
    DegenerateRange,
    EmptyHistogram,
    NonpositiveSigma,
    SizeMismatch,
    ZeroVariance,
)
from qsdenoise.imgio import Patch

DEFAULT_BINS = 64


@dataclass(frozen=True)
class SimilarityMetric:
    """Tagged choice of measure: nmi (bins), pearson, or rbf (sigma)."""

    kind: str
    bins: int = DEFAULT_BINS
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("nmi", "pearson", "rbf"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "nmi" and self.bins < 2:
            raise ValueError("nmi needs bins >= 2")
        if self.kind == "rbf" and not self.sigma > 0:
            raise NonpositiveSigma("rbf needs sigma > 0")

    @classmethod
    def nmi_metric(cls, bins: int = DEFAULT_BINS) -> "SimilarityMetric":
        return cls(kind="nmi", bins=bins)

    @classmethod
    def pearson_metric(cls) -> "SimilarityMetric":
        return cls(kind="pearson")

    @classmethod
    def rbf_metric(cls, sigma: float) -> "SimilarityMetric":
        return cls(kind="rbf", sigma=sigma)

    def descriptor(self) -> str:
        """Manifest-header form, e.g. 'nmi:bins=64'."""
        if self.kind == "nmi":
            return f"nmi:bins={self.bins}"
        if self.kind == "rbf":
            return f"rbf:sigma={self.sigma!r}"
        return "pearson"

    @classmethod
    def from_descriptor(cls, text: str) -> "SimilarityMetric":
        name, _, params = text.partition(":")
        if name == "pearson":
            return cls.pearson_metric()
        if name == "nmi":
            bins = DEFAULT_BINS
            if params:
                key, _, value = params.partition("=")
                if key != "bins":
                    raise ValueError(f"bad nmi parameter {params!r}")
                bins = int(value)
            return cls.nmi_metric(bins)
        if name == "rbf":
            key, _, value = params.partition("=")
            if key != "sigma":
                raise ValueError(f"rbf descriptor needs sigma, got {text!r}")
            return cls.rbf_metric(float(value))
        raise ValueError(f"unknown metric descriptor {text!r}")


@dataclass(frozen=True)
class JointHistogram:
    """Joint intensity counts of a patch pair over a shared binning."""

    bins: int
    counts: np.ndarray  # (bins, bins) int64
    range: tuple[float, float]
    total: int

    @property
    def marginal_x(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def marginal_y(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def _pixels(a) -> np.ndarray:
    if isinstance(a, Patch):
        return a.pixels
    return np.asarray(a, dtype=np.float64)


def _check_same_size(pa: np.ndarray, pb: np.ndarray) -> None:
    if pa.shape != pb.shape:
        raise SizeMismatch(f"shapes differ: {pa.shape} vs {pb.shape}")


def _check_range(value_range: tuple[float, float]) -> tuple[float, float]:
    lo, hi = float(value_range[0]), float(value_range[1])
    if not lo < hi:
        raise DegenerateRange(f"need lo < hi, got [{lo}, {hi}]")
    return lo, hi


def bin_indices(
    pixels: np.ndarray, bins: int, value_range: tuple[float, float]
) -> np.ndarray:
    """Clamp into the range, then bin: min(floor((v-lo)/(hi-lo)*bins), bins-1)."""
    lo, hi = _check_range(value_range)
    v = np.clip(pixels, lo, hi)
    idx = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
    return np.minimum(idx, bins - 1)


def joint_histogram(
    a, b, bins: int = DEFAULT_BINS, value_range: tuple[float, float] = (0.0, 1.0)
) -> JointHistogram:
    """Count co-occurring intensity bins over all pixel pairs."""
    pa, pb = _pixels(a), _pixels(b)
    _check_same_size(pa, pb)
    lo, hi = _check_range(value_range)
    ia = bin_indices(pa, bins, (lo, hi))
    ib = bin_indices(pb, bins, (lo, hi))
    counts = np.bincount(
        ia.ravel() * bins + ib.ravel(), minlength=bins * bins
    ).reshape(bins, bins)
    return JointHistogram(
        bins=bins, counts=counts, range=(lo, hi), total=int(pa.size)
    )


def entropy(counts: np.ndarray) -> float:
    """Shannon entropy in bits of a histogram given as raw counts."""
    counts = np.asarray(counts)
    total = counts.sum()
    if total <= 0:
        raise EmptyHistogram("histogram holds no counts")
    p = counts[counts > 0] / float(total)
    return float(-(p * np.log2(p)).sum())


def mutual_information(h: JointHistogram) -> float:
    """I(X,Y) in bits, as the direct sum over nonzero joint cells."""
    if h.total <= 0:
        raise EmptyHistogram("histogram holds no counts")
    total = float(h.total)
    pxy = h.counts / total
    px = h.marginal_x / total
    py = h.marginal_y / total
    nz = h.counts > 0
    ratio = pxy[nz] / (px[:, None] * py[None, :])[nz]
    return float((pxy[nz] * np.log2(ratio)).sum())


def nmi(
    a, b, bins: int = DEFAULT_BINS, value_range: tuple[float, float] = (0.0, 1.0)
) -> float:
    """Normalized mutual information 2I/(H(X)+H(Y)) in [0, 1].

    When both patches are constant after binning the formula is 0/0;
    the result is then 1 if the two bins coincide and 0 otherwise.
    """
    pa, pb = _pixels(a), _pixels(b)
    _check_same_size(pa, pb)
    lo, hi = _check_range(value_range)
    ia = bin_indices(pa, bins, (lo, hi))
    ib = bin_indices(pb, bins, (lo, hi))
    return float(kernels.nmi_pair(ia, ib, bins))


def pearson(a, b) -> float:
    """Population Pearson correlation of the flattened pixel pairs."""
    pa, pb = _pixels(a), _pixels(b)
    _check_same_size(pa, pb)
    r = float(kernels.pearson_pair(pa, pb))
    if np.isnan(r):
        raise ZeroVariance("pearson is undefined for a constant patch")
    return r


def rbf(a, b, sigma: float) -> float:
    """exp(-||a-b||^2 / (2 sigma^2)) on the flattened pixel vectors."""
    if not sigma > 0:
        raise NonpositiveSigma(f"sigma must be > 0, got {sigma}")
    pa, pb = _pixels(a), _pixels(b)
    _check_same_size(pa, pb)
    return float(kernels.rbf_pair(pa, pb, float(sigma)))


def similarity(
    a,
    b,
    metric: SimilarityMetric,
    value_range: tuple[float, float] | None = None,
) -> float:
    """Score a pair under the chosen metric (raw score, not the weight)."""
    if metric.kind == "nmi":
        if value_range is None:
            raise DegenerateRange("nmi needs an explicit value_range")
        return nmi(a, b, bins=metric.bins, value_range=value_range)
    if metric.kind == "pearson":
        return pearson(a, b)
    return rbf(a, b, metric.sigma)


def weight_from_score(score: float, metric: SimilarityMetric) -> float:
    """Map a raw score to a loss weight in [0, 1]."""
    if metric.kind == "pearson":
        return max(score, 0.0)
    return score
