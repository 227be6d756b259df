"""Desk-scale weighted denoiser training.

The model is a single k-by-k convolution kernel plus bias, applied with
replicate borders, trained on (noisy patch, clean patch, weight) triples
by minimizing the weighted mean of per-pair squared-error norms:

    J(theta) = sum_i w_i * ||f(x_i, theta) - y_i||_2^2 / sum_i w_i

Normalizing by the weight sum (not the pair count) makes J a true
weighted mean: rescaling all weights by a constant changes nothing, and
zero-weight pairs contribute exactly nothing. Training is full-batch
gradient descent; an independent closed-form weighted least-squares
solver acts as the oracle for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from qsdenoise.errors import (
    AllZeroWeights,
    Divergence,
    EmptySet,
    ImageTooSmall,
    MissingVolume,
    RankDeficient,
)
from qsdenoise.imgio import ImageVolume, extract_patch

DEFAULT_KERNEL_SIZE = 3
DEFAULT_LEARNING_RATE = 1e-2
DEFAULT_EPOCHS = 2000


@dataclass(frozen=True)
class LinearDenoiser:
    """k-by-k kernel plus bias mapping a neighborhood to one pixel."""

    kernel: np.ndarray
    bias: float

    def __post_init__(self):
        kern = np.asarray(self.kernel, dtype=np.float64)
        if kern.ndim != 2 or kern.shape[0] != kern.shape[1]:
            raise ValueError("kernel must be square")
        if kern.shape[0] % 2 == 0 or kern.shape[0] < 1:
            raise ValueError("kernel size must be odd and >= 1")
        object.__setattr__(self, "kernel", kern)

    @property
    def k(self) -> int:
        return self.kernel.shape[0]

    def theta(self) -> np.ndarray:
        """Flattened parameter vector: kernel row-major, then bias."""
        return np.concatenate([self.kernel.ravel(), [self.bias]])

    @classmethod
    def from_theta(cls, theta: np.ndarray, k: int) -> "LinearDenoiser":
        return cls(kernel=theta[: k * k].reshape(k, k), bias=float(theta[-1]))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    epochs: int = DEFAULT_EPOCHS
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class WeightedPairSet:
    """Stacked (noisy, clean, weight) triples with equal patch sizes."""

    def __init__(self, ld: np.ndarray, nd: np.ndarray, weights: np.ndarray):
        self.ld = np.asarray(ld, dtype=np.float64)
        self.nd = np.asarray(nd, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.ld.shape != self.nd.shape or self.ld.ndim != 3:
            raise ValueError("need matching (n, p, p) patch stacks")
        if self.weights.shape != (self.ld.shape[0],):
            raise ValueError("need one weight per pair")
        if self.weights.min(initial=0.0) < 0 or self.weights.max(initial=0.0) > 1:
            raise ValueError("weights must lie in [0, 1]")

    def __len__(self) -> int:
        return self.ld.shape[0]

    @classmethod
    def from_pairs(cls, pairs) -> "WeightedPairSet":
        """Build from an iterable of (ld_pixels, nd_pixels, weight)."""
        pairs = list(pairs)
        if not pairs:
            raise EmptySet("no pairs supplied")
        ld = np.stack([np.asarray(p[0], dtype=np.float64) for p in pairs])
        nd = np.stack([np.asarray(p[1], dtype=np.float64) for p in pairs])
        w = np.array([float(p[2]) for p in pairs])
        return cls(ld, nd, w)


def neighborhood_matrix(img: np.ndarray, k: int) -> np.ndarray:
    """Rows are the replicate-padded k*k neighborhoods of every pixel."""
    r = k // 2
    padded = np.pad(np.asarray(img, dtype=np.float64), r, mode="edge")
    windows = sliding_window_view(padded, (k, k))
    return windows.reshape(img.shape[0] * img.shape[1], k * k)


def denoise(d: LinearDenoiser, img: np.ndarray) -> np.ndarray:
    """Apply the kernel convolutionally; output matches the input shape."""
    img = np.asarray(img, dtype=np.float64)
    if min(img.shape) < d.k:
        raise ImageTooSmall(f"image {img.shape} smaller than k={d.k}")
    a = neighborhood_matrix(img, d.k)
    return (a @ d.kernel.ravel() + d.bias).reshape(img.shape)


def _design(s: WeightedPairSet, k: int):
    """Stacked design matrix, targets, and per-pixel pair weights."""
    if len(s) == 0:
        raise EmptySet("no pairs supplied")
    blocks = [neighborhood_matrix(x, k) for x in s.ld]
    a = np.vstack(blocks)
    a = np.hstack([a, np.ones((a.shape[0], 1))])
    b = np.concatenate([y.ravel() for y in s.nd])
    wpix = np.repeat(s.weights, s.ld.shape[1] * s.ld.shape[2])
    return a, b, wpix


def weighted_mse_objective(d: LinearDenoiser, s: WeightedPairSet) -> float:
    """Weighted mean over pairs of the squared-error norm of f(x)-y."""
    if len(s) == 0:
        raise EmptySet("no pairs supplied")
    wsum = float(s.weights.sum())
    if wsum == 0.0:
        raise AllZeroWeights("all pair weights are zero")
    acc = 0.0
    for x, y, w in zip(s.ld, s.nd, s.weights):
        r = denoise(d, x) - y
        acc += w * float((r * r).sum())
    return acc / wsum


def closed_form_weighted_ls(s: WeightedPairSet, k: int = DEFAULT_KERNEL_SIZE) -> LinearDenoiser:
    """Exact minimizer of the weighted objective via least squares.

    Solves min ||sqrt(W)(A theta - b)||_2 on the stacked design matrix,
    which satisfies the weighted normal equations (A^T W A) theta = A^T W b.
    """
    a, b, wpix = _design(s, k)
    sw = np.sqrt(wpix)
    theta, _, rank, _ = np.linalg.lstsq(a * sw[:, None], b * sw, rcond=None)
    if rank < a.shape[1]:
        raise RankDeficient(
            f"design matrix rank {rank} < {a.shape[1]} parameters"
        )
    return LinearDenoiser.from_theta(theta, k)


def gd_train(
    s: WeightedPairSet,
    k: int = DEFAULT_KERNEL_SIZE,
    cfg: TrainConfig = TrainConfig(),
    return_history: bool = False,
):
    """Full-batch gradient descent on the weighted objective.

    Returns the trained denoiser, or (denoiser, per-epoch objective
    values) when return_history is set. Raises Divergence if the
    objective ever grows past 10x its initial value.
    """
    wsum = float(s.weights.sum())
    if len(s) == 0:
        raise EmptySet("no pairs supplied")
    if wsum == 0.0:
        raise AllZeroWeights("all pair weights are zero")
    a, b, wpix = _design(s, k)
    # the gradient of the quadratic objective only needs these moments
    g = (a * wpix[:, None]).T @ a
    h = a.T @ (wpix * b)
    const = float(wpix @ (b * b))
    theta = np.zeros(k * k + 1)
    history = []
    initial = None
    for _ in range(cfg.epochs):
        gt = g @ theta
        objective = (theta @ gt - 2.0 * (theta @ h) + const) / wsum
        if initial is None:
            initial = objective
        elif objective > 10.0 * initial:
            raise Divergence(f"objective {objective} grew past 10x initial")
        history.append(objective)
        theta = theta - cfg.learning_rate * (2.0 / wsum) * (gt - h)
    denoiser = LinearDenoiser.from_theta(theta, k)
    if return_history:
        history.append(
            (theta @ (g @ theta) - 2.0 * (theta @ h) + const) / wsum
        )
        return denoiser, history
    return denoiser


def pairs_from_manifest(
    manifest, volumes: dict[str, ImageVolume], normalize: bool = True
) -> WeightedPairSet:
    """Materialize manifest records into patch triples.

    volumes maps volume id -> ImageVolume. With normalize=True pixel
    values are mapped through each volume's declared range onto [0, 1],
    which is the scale the default learning rate is tuned for.
    """
    triples = []
    for rec in manifest.records:
        for vid in (rec.ld_vol, rec.nd_vol):
            if vid not in volumes:
                raise MissingVolume(f"manifest references unknown volume {vid!r}")
        ld_vol = volumes[rec.ld_vol]
        nd_vol = volumes[rec.nd_vol]
        x = extract_patch(ld_vol, rec.ld_slice, rec.ld_row, rec.ld_col, rec.p).pixels
        y = extract_patch(nd_vol, rec.nd_slice, rec.nd_row, rec.nd_col, rec.p).pixels
        if normalize:
            x = (x - ld_vol.intensity_min) / (ld_vol.intensity_max - ld_vol.intensity_min)
            y = (y - nd_vol.intensity_min) / (nd_vol.intensity_max - nd_vol.intensity_min)
        triples.append((x, y, rec.weight))
    return WeightedPairSet.from_pairs(triples)
