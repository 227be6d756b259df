"""Tiny convolutional disentanglement model.

Two encoders map images into a shared content space; a third maps the
noisy image into an artifact space. One decoder renders content alone
(clean image), another renders content combined with an artifact code
(noisy image). Two discriminators judge domain plausibility. Capacity
is deliberately small so toy runs finish in minutes on CPU.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


def conv(cin, cout, stride=1):
    return nn.Conv2d(cin, cout, 3, stride=stride, padding=1)


class ContentEncoder(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(
            conv(1, channels), nn.ReLU(inplace=True),
            conv(channels, 2 * channels, stride=2), nn.ReLU(inplace=True),
            conv(2 * channels, 2 * channels), nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.net(x)


class ArtifactEncoder(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(
            conv(1, channels), nn.ReLU(inplace=True),
            conv(channels, 2 * channels, stride=2), nn.ReLU(inplace=True),
            conv(2 * channels, 2 * channels), nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.net(x)


class CleanDecoder(nn.Module):
    """Content code -> artifact-free image."""

    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(
            conv(2 * channels, 2 * channels), nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            conv(2 * channels, channels), nn.ReLU(inplace=True),
            conv(channels, 1),
        )

    def forward(self, content):
        return self.net(content)


class NoisyDecoder(nn.Module):
    """(content code, artifact code) -> artifact-affected image."""

    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(
            conv(4 * channels, 2 * channels), nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            conv(2 * channels, channels), nn.ReLU(inplace=True),
            conv(channels, 1),
        )

    def forward(self, content, artifact):
        return self.net(torch.cat([content, artifact], dim=1))


class Discriminator(nn.Module):
    """Image -> probability in (0, 1) that it belongs to the domain."""

    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(1, channels, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(channels, 2 * channels, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(2 * channels, 1, 3, padding=1),
        )

    def forward(self, x):
        return torch.sigmoid(self.net(x).mean(dim=(1, 2, 3)))


@dataclass
class Bundle:
    """The seven images of one forward pass (batched tensors)."""

    x_a: torch.Tensor
    y: torch.Tensor
    x_hat: torch.Tensor
    y_hat: torch.Tensor
    x_a_hat: torch.Tensor
    y_a_hat: torch.Tensor
    y_tilde: torch.Tensor


class DisentangleModel(nn.Module):
    def __init__(self, channels: int = 8):
        super().__init__()
        self.enc_clean = ContentEncoder(channels)      # E_I
        self.enc_content = ContentEncoder(channels)    # E^c on noisy images
        self.enc_artifact = ArtifactEncoder(channels)  # E^a on noisy images
        self.dec_clean = CleanDecoder(channels)        # G_I
        self.dec_noisy = NoisyDecoder(channels)        # G_{I^a}
        self.disc_clean = Discriminator(channels)      # D_I
        self.disc_noisy = Discriminator(channels)      # D_{I^a}
        self.trained = False

    def generator_parameters(self):
        for module in (
            self.enc_clean, self.enc_content, self.enc_artifact,
            self.dec_clean, self.dec_noisy,
        ):
            yield from module.parameters()

    def discriminator_parameters(self):
        for module in (self.disc_clean, self.disc_noisy):
            yield from module.parameters()

    def forward_bundle(self, x_a: torch.Tensor, y: torch.Tensor) -> Bundle:
        """Full disentangling pass producing all seven images."""
        c_y = self.enc_clean(y)
        c_x = self.enc_content(x_a)
        artifact = self.enc_artifact(x_a)
        x_hat = self.dec_clean(c_x)
        y_hat = self.dec_clean(c_y)
        x_a_hat = self.dec_noisy(c_x, artifact)
        y_a_hat = self.dec_noisy(c_y, artifact)
        y_tilde = self.dec_clean(self.enc_content(y_a_hat))
        return Bundle(x_a, y, x_hat, y_hat, x_a_hat, y_a_hat, y_tilde)

    def denoise(self, x_a: torch.Tensor) -> torch.Tensor:
        """Artifact reduction: decode only the content of a noisy image."""
        return self.dec_clean(self.enc_content(x_a))

    def synthesize_noise(self, y: torch.Tensor, x_a: torch.Tensor) -> torch.Tensor:
        """Render y's content with x_a's artifact code."""
        import warnings

        if not self.trained:
            warnings.warn("synthesize_noise called on an untrained model")
        return self.dec_noisy(self.enc_clean(y), self.enc_artifact(x_a))
