"""Training loop, evaluation, loss logging and the ablation driver.

Updates alternate one discriminator step and one generator step per
batch (standard single-step scheme, default torch initialization; both
are recorded in the loss-log header). The generator minimizes the
literal adversarial fake terms plus the similarity-weighted supervised
sum; discriminators minimize the usual binary cross-entropy, which is
the bounded counterpart of the same objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from toyadn import losses
from toyadn.manifest import MODES, Manifest, PairSet, load_pairs
from toyadn.model import Bundle, DisentangleModel
from toyadn.rawio import Volume, save_pgm


class Divergence(RuntimeError):
    """A loss became non-finite during training."""


@dataclass(frozen=True)
class HarnessConfig:
    batch_size: int = 2
    learning_rate: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.99)
    epochs: int = 5
    lam: float = 20.0
    mode: str = "matched-weighted"
    seed: int = 0
    channels: int = 8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("rates and counts must be positive")


@dataclass
class LossRow:
    epoch: int
    l_adv: float
    l_rec: float
    l_art: float
    l_self: float
    total: float


def _tensor(stack: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(stack).float().unsqueeze(1)


def train(
    model: DisentangleModel, pairs: PairSet, cfg: HarnessConfig
) -> tuple[DisentangleModel, list[LossRow]]:
    """Train in place; returns the model and the per-epoch loss log."""
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt_g = torch.optim.Adam(
        model.generator_parameters(), lr=cfg.learning_rate, betas=cfg.betas
    )
    opt_d = torch.optim.Adam(
        model.discriminator_parameters(), lr=cfg.learning_rate, betas=cfg.betas
    )
    x_all = _tensor(pairs.ld)
    y_all = _tensor(pairs.nd)
    w_all = torch.from_numpy(pairs.weights).float()
    n = len(pairs)
    rows: list[LossRow] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sums = np.zeros(5)
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x_a = x_all[idx]
            y = y_all[idx]
            w = w_all[idx]

            bundle = model.forward_bundle(x_a, y)

            # discriminator step (bounded BCE counterpart of the objective)
            d_real_c = losses.clamp_prob(model.disc_clean(y))
            d_fake_c = losses.clamp_prob(model.disc_clean(bundle.x_hat.detach()))
            d_real_n = losses.clamp_prob(model.disc_noisy(x_a))
            d_fake_n = losses.clamp_prob(model.disc_noisy(bundle.y_a_hat.detach()))
            loss_d = -(
                torch.log(d_real_c).mean()
                + torch.log(1.0 - d_fake_c).mean()
                + torch.log(d_real_n).mean()
                + torch.log(1.0 - d_fake_n).mean()
            )
            opt_d.zero_grad()
            loss_d.backward()
            opt_d.step()

            # generator step: literal fake terms + weighted supervised sum
            g_fake_c = losses.clamp_prob(model.disc_clean(bundle.x_hat))
            g_fake_n = losses.clamp_prob(model.disc_noisy(bundle.y_a_hat))
            adv_fake = (
                (1.0 - torch.log(g_fake_c)).mean()
                + (1.0 - torch.log(g_fake_n)).mean()
            )
            supervised = losses.weighted_supervised(bundle, w, cfg.lam)
            loss_g = adv_fake + supervised
            if not torch.isfinite(loss_g) or not torch.isfinite(loss_d):
                raise Divergence(f"non-finite loss at epoch {epoch}")
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

            with torch.no_grad():
                l_adv = losses.adversarial_literal(
                    model.disc_clean(y), model.disc_clean(bundle.x_hat),
                    model.disc_noisy(x_a), model.disc_noisy(bundle.y_a_hat),
                )
                l_rec = losses.reconstruction(bundle).mean()
                l_art = losses.artifact_consistency(bundle).mean()
                l_self = losses.self_reduction(bundle).mean()
                total = l_adv + losses.weighted_supervised(bundle, w, cfg.lam)
            sums += [float(v) for v in (l_adv, l_rec, l_art, l_self, total)]
            batches += 1
        avg = sums / batches
        rows.append(LossRow(epoch, *avg))
    model.trained = True
    return model, rows


def write_loss_log(rows: list[LossRow], cfg: HarnessConfig, path: str | Path) -> None:
    lines = [
        "# alternating single-step D/G updates, default torch init, "
        f"adam lr={cfg.learning_rate} betas={cfg.betas} lam={cfg.lam} "
        f"mode={cfg.mode} seed={cfg.seed}",
        "epoch\tl_adv\tl_rec\tl_art\tl_self\ttotal",
    ]
    for r in rows:
        lines.append(
            f"{r.epoch}\t{r.l_adv:.9g}\t{r.l_rec:.9g}\t{r.l_art:.9g}"
            f"\t{r.l_self:.9g}\t{r.total:.9g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


# ------------------------------------------------------------ evaluation


def psnr(x: np.ndarray, y: np.ndarray, max_val: float = 1.0) -> float:
    err = float(np.mean((x - y) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / err)


def denoise_volume(model: DisentangleModel, vol: Volume) -> np.ndarray:
    """Denoise every slice; returns a [0,1]-scaled stack."""
    with torch.no_grad():
        batch = torch.from_numpy(vol.normalized()).float().unsqueeze(1)
        out = model.denoise(batch).squeeze(1).numpy()
    return np.clip(out, 0.0, 1.0)


def mean_test_psnr(
    model: DisentangleModel, test_ld: list[Volume], test_nd: list[Volume]
) -> float:
    values = []
    for noisy, clean in zip(test_ld, test_nd):
        denoised = denoise_volume(model, noisy)
        reference = clean.normalized()
        for s in range(denoised.shape[0]):
            values.append(psnr(denoised[s], reference[s]))
    return float(np.mean(values))


def save_denoised_pgm(model: DisentangleModel, vol: Volume, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for s, img in enumerate(denoise_volume(model, vol)):
        path = out_dir / f"{vol.id}_denoised_{s:03d}.pgm"
        save_pgm(img * 255.0, path, maxval=255)
        written.append(path)
    return written


# ------------------------------------------------------------ bundles


BUNDLE_ORDER = ("x_a", "y", "x_hat", "y_hat", "x_a_hat", "y_a_hat", "y_tilde")


def export_bundles(
    model: DisentangleModel,
    pairs: PairSet,
    out_dir: str | Path,
    count: int = 10,
) -> list[dict[str, Path]]:
    """Write forward-pass bundles as 8-bit PGMs (the loss-eval contract)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    exported = []
    with torch.no_grad():
        for k in range(min(count, len(pairs))):
            x_a = _tensor(pairs.ld[k:k + 1])
            y = _tensor(pairs.nd[k:k + 1])
            bundle = model.forward_bundle(x_a, y)
            paths = {}
            for name in BUNDLE_ORDER:
                img = getattr(bundle, name).squeeze().numpy()
                path = out_dir / f"bundle{k:02d}_{name}.pgm"
                save_pgm(np.clip(img, 0.0, 1.0) * 255.0, path, maxval=255)
                paths[name] = path
            exported.append(paths)
    return exported


# ------------------------------------------------------------ ablation


@dataclass
class AblationResult:
    mode_psnr: dict[str, float] = field(default_factory=dict)

    def ordered(self) -> bool:
        return (
            self.mode_psnr["matched-weighted"]
            >= self.mode_psnr["matched-unweighted"]
            >= self.mode_psnr["unpaired-random"]
        )


def run_ablation(
    manifest: Manifest,
    volumes: dict[str, Volume],
    test_ld: list[Volume],
    test_nd: list[Volume],
    seeds: tuple[int, ...] = (0, 1, 2),
    cfg: HarnessConfig = HarnessConfig(),
) -> AblationResult:
    """Train every weighting mode over the seeds; average the test PSNR."""
    result = AblationResult()
    for mode in MODES:
        scores = []
        for seed in seeds:
            run_cfg = HarnessConfig(
                batch_size=cfg.batch_size,
                learning_rate=cfg.learning_rate,
                betas=cfg.betas,
                epochs=cfg.epochs,
                lam=cfg.lam,
                mode=mode,
                seed=seed,
                channels=cfg.channels,
            )
            pairs = load_pairs(manifest, volumes, mode=mode, seed=seed)
            torch.manual_seed(seed)
            model = DisentangleModel(channels=run_cfg.channels)
            train(model, pairs, run_cfg)
            scores.append(mean_test_psnr(model, test_ld, test_nd))
        result.mode_psnr[mode] = float(np.mean(scores))
    return result
