"""Forward evaluation of the disentanglement losses and their weighted total.

Works on a bundle of seven equally-sized images from one forward pass
of a disentangling denoiser:

    x_a      noisy input            y        clean input
    x_hat    denoised x_a           y_hat    reconstruction of y
    x_a_hat  reconstruction of x_a  y_a_hat  y with x_a's artifact added
    y_tilde  y_a_hat denoised again (self-reduction)

All L1 terms are means over pixels, so loss magnitudes do not depend on
patch size. The similarity weight w of the underlying pair multiplies
only the three supervised terms, never the adversarial one:

    total = l_adv + w * (lambda_rec*l_rec + lambda_art*l_art + lambda_self*l_self)

The adversarial term follows the literal "1 - log D" composition by
default; set standard_gan_form=True for the usual log(1 - D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qsdenoise.errors import OutOfDomain, SizeMismatch, WeightOutOfRange

DEFAULT_LAMBDA = 20.0

_BUNDLE_FIELDS = (
    "x_a", "y", "x_hat", "y_hat", "x_a_hat", "y_a_hat", "y_tilde"
)


@dataclass(frozen=True)
class DisentangleBundle:
    """The seven images of one forward pass, all sharing one shape."""

    x_a: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray
    x_a_hat: np.ndarray
    y_a_hat: np.ndarray
    y_tilde: np.ndarray

    def __post_init__(self):
        shape = np.asarray(self.x_a).shape
        for name in _BUNDLE_FIELDS:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise SizeMismatch(
                    f"bundle image {name} has shape {arr.shape}, expected {shape}"
                )
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class DiscriminatorOutputs:
    """The four discriminator evaluations, each strictly inside (0, 1)."""

    d_i_y: float
    d_i_xhat: float
    d_ia_xa: float
    d_ia_yahat: float

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not 0.0 < v < 1.0:
                raise OutOfDomain(f"{name}={v} is not inside (0, 1)")


@dataclass(frozen=True)
class LossWeights:
    lambda_rec: float = DEFAULT_LAMBDA
    lambda_art: float = DEFAULT_LAMBDA
    lambda_self: float = DEFAULT_LAMBDA

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")


@dataclass(frozen=True)
class LossReport:
    l_adv: float
    l_rec: float
    l_art: float
    l_self: float
    total: float


def l1_mean(a, b) -> float:
    """Mean absolute difference over all pixels."""
    ax = np.asarray(a, dtype=np.float64)
    ay = np.asarray(b, dtype=np.float64)
    if ax.shape != ay.shape:
        raise SizeMismatch(f"shapes differ: {ax.shape} vs {ay.shape}")
    return float(np.mean(np.abs(ax - ay)))


def adversarial_loss(
    d: DiscriminatorOutputs, standard_gan_form: bool = False
) -> float:
    """Sum of the two adversarial terms, natural log.

    Literal form:  log D(real) + (1 - log D(fake)) per domain.
    Standard form: log D(real) + log(1 - D(fake)) per domain.
    """
    if standard_gan_form:
        fake_i = math.log(1.0 - d.d_i_xhat)
        fake_ia = math.log(1.0 - d.d_ia_yahat)
    else:
        fake_i = 1.0 - math.log(d.d_i_xhat)
        fake_ia = 1.0 - math.log(d.d_ia_yahat)
    return math.log(d.d_i_y) + fake_i + math.log(d.d_ia_xa) + fake_ia


def reconstruction_loss(b: DisentangleBundle) -> float:
    """Autoencoding error of both domains."""
    return l1_mean(b.x_a_hat, b.x_a) + l1_mean(b.y_hat, b.y)


def artifact_consistency_loss(b: DisentangleBundle) -> float:
    """The artifact removed from x_a must equal the one added to y."""
    return l1_mean(b.x_a - b.x_hat, b.y_a_hat - b.y)


def self_reduction_loss(b: DisentangleBundle) -> float:
    """Adding then removing the artifact must give y back."""
    return l1_mean(b.y_tilde, b.y)


def total_loss(
    b: DisentangleBundle,
    d: DiscriminatorOutputs,
    lw: LossWeights,
    w: float,
    standard_gan_form: bool = False,
) -> LossReport:
    """All four components plus the similarity-weighted total.

    With w = 1 this reduces to the plain unweighted objective; with
    w = 0 the supervised terms vanish and total equals l_adv exactly.
    """
    if not 0.0 <= w <= 1.0:
        raise WeightOutOfRange(f"w={w} is not in [0, 1]")
    l_adv = adversarial_loss(d, standard_gan_form=standard_gan_form)
    l_rec = reconstruction_loss(b)
    l_art = artifact_consistency_loss(b)
    l_self = self_reduction_loss(b)
    total = l_adv + w * (
        lw.lambda_rec * l_rec + lw.lambda_art * l_art + lw.lambda_self * l_self
    )
    return LossReport(
        l_adv=l_adv, l_rec=l_rec, l_art=l_art, l_self=l_self, total=total
    )


def batch_total_loss(
    items: list[tuple[DisentangleBundle, DiscriminatorOutputs, float]],
    lw: LossWeights,
    standard_gan_form: bool = False,
) -> LossReport:
    """Equal-weight batch mean of per-pair reports.

    Each pair's w multiplies its own supervised terms before averaging,
    so the batch total is the mean of the per-pair totals. Component
    fields report the raw (unweighted) per-pair means.
    """
    if not items:
        raise ValueError("batch must contain at least one item")
    reports = [
        total_loss(b, d, lw, w, standard_gan_form=standard_gan_form)
        for b, d, w in items
    ]
    n = float(len(reports))
    return LossReport(
        l_adv=sum(r.l_adv for r in reports) / n,
        l_rec=sum(r.l_rec for r in reports) / n,
        l_art=sum(r.l_art for r in reports) / n,
        l_self=sum(r.l_self for r in reports) / n,
        total=sum(r.total for r in reports) / n,
    )
