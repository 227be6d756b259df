"""Harness-side loss algebra, mirroring the matching engine's loss-eval.

All L1 terms are means over pixels. The adversarial term follows the
literal "1 - log D(fake)" composition; discriminator probabilities are
clamped away from {0, 1} before the log so float32 saturation cannot
produce infinities. Per-pair weights multiply only the supervised terms:

    total = l_adv + w * lam * (l_rec + l_art + l_self)
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from toyadn.model import Bundle

EPS = 1e-6


@dataclass(frozen=True)
class LossValues:
    l_adv: float
    l_rec: float
    l_art: float
    l_self: float
    total: float


def l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return (a - b).abs().mean()


def per_sample_l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference per batch item: shape (B,)."""
    return (a - b).abs().mean(dim=(1, 2, 3))


def clamp_prob(d: torch.Tensor) -> torch.Tensor:
    return d.clamp(EPS, 1.0 - EPS)


def adversarial_literal(d_real_clean, d_fake_clean, d_real_noisy, d_fake_noisy):
    """log D(real) + (1 - log D(fake)) summed over both domains."""
    return (
        torch.log(clamp_prob(d_real_clean)).mean()
        + (1.0 - torch.log(clamp_prob(d_fake_clean))).mean()
        + torch.log(clamp_prob(d_real_noisy)).mean()
        + (1.0 - torch.log(clamp_prob(d_fake_noisy))).mean()
    )


def reconstruction(b: Bundle) -> torch.Tensor:
    return per_sample_l1(b.x_a_hat, b.x_a) + per_sample_l1(b.y_hat, b.y)


def artifact_consistency(b: Bundle) -> torch.Tensor:
    return per_sample_l1(b.x_a - b.x_hat, b.y_a_hat - b.y)


def self_reduction(b: Bundle) -> torch.Tensor:
    return per_sample_l1(b.y_tilde, b.y)


def weighted_supervised(b: Bundle, w: torch.Tensor, lam: float) -> torch.Tensor:
    """Batch mean of w_i * lam * (l_rec_i + l_art_i + l_self_i)."""
    per_pair = reconstruction(b) + artifact_consistency(b) + self_reduction(b)
    return (w * lam * per_pair).mean()


def total_literal(
    b: Bundle,
    d_real_clean, d_fake_clean, d_real_noisy, d_fake_noisy,
    w: torch.Tensor,
    lam: float,
) -> torch.Tensor:
    """The full weighted objective (logged; the trainer optimizes its parts)."""
    adv = adversarial_literal(d_real_clean, d_fake_clean, d_real_noisy, d_fake_noisy)
    return adv + weighted_supervised(b, w, lam)
