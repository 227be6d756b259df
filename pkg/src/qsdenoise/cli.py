"""Batch command-line front-end.

Subcommands: match, hist, eval, denoise-baseline, loss-eval, train-toy.
Configuration comes from a plain key=value text file (--config); unknown
keys are rejected. Exit codes are uniform across commands:

    0 success (including an EMPTY match result)
    2 configuration error
    3 IO error (missing/corrupt files)
    4 empty input
    5 dimension mismatch

stdout carries data, stderr carries diagnostics.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qsdenoise import baselines, imgio, losses, matcher, metrics, trainer
from qsdenoise.errors import (
    AllZeroWeights,
    ConfigError,
    DimensionMismatch,
    Divergence,
    EmptyHistogram,
    EmptyInput,
    EmptySet,
    EmptyTarget,
    ImageTooSmall,
    MalformedHeader,
    MalformedManifest,
    MissingVolume,
    OutOfBounds,
    PatchTooLarge,
    QsdenoiseError,
    SizeMismatch,
    TruncatedData,
)
from qsdenoise.similarity import SimilarityMetric

_CONFIG_KEYS = {
    # datasets
    "ld_volumes", "nd_volumes",
    # matching
    "patch_size", "stride", "metric", "threshold", "top_k", "slice_match",
    "workers", "seed",
    # frequency filter
    "sigma",
    # losses
    "lambda_rec", "lambda_art", "lambda_self", "standard_gan_form", "weight",
    "d_i_y", "d_i_xhat", "d_ia_xa", "d_ia_yahat",
    # toy trainer
    "learning_rate", "epochs", "kernel_size",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    raw: dict[str, str]

    def get(self, key: str, default=None):
        return self.raw.get(key, default)

    def _typed(self, key: str, cast, default):
        if key not in self.raw:
            return default
        try:
            return cast(self.raw[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {self.raw[key]!r}") from exc

    def int_(self, key, default=None):
        return self._typed(key, int, default)

    def float_(self, key, default=None):
        return self._typed(key, float, default)

    def bool_(self, key, default=False):
        if key not in self.raw:
            return default
        value = self.raw[key].strip().lower()
        if value in _TRUE:
            return True
        if value in _FALSE:
            return False
        raise ConfigError(f"bad boolean for {key!r}: {self.raw[key]!r}")

    def paths(self, key) -> list[str]:
        value = self.raw.get(key, "")
        return [p.strip() for p in value.split(",") if p.strip()]

    def match_config(self) -> matcher.MatchConfig:
        try:
            metric = SimilarityMetric.from_descriptor(self.get("metric", "nmi:bins=64"))
            return matcher.MatchConfig(
                patch_size=self.int_("patch_size", 64),
                stride=self.int_("stride", None),
                metric=metric,
                threshold=self.float_("threshold", 0.1),
                top_k=self.int_("top_k", 1),
                slice_match_enabled=self.bool_("slice_match", True),
            )
        except (ValueError, QsdenoiseError) as exc:
            raise ConfigError(str(exc)) from exc

    def freq_config(self) -> baselines.FreqFilterConfig:
        try:
            return baselines.FreqFilterConfig(sigma=self.float_("sigma", 55.0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def loss_weights(self) -> losses.LossWeights:
        try:
            return losses.LossWeights(
                lambda_rec=self.float_("lambda_rec", losses.DEFAULT_LAMBDA),
                lambda_art=self.float_("lambda_art", losses.DEFAULT_LAMBDA),
                lambda_self=self.float_("lambda_self", losses.DEFAULT_LAMBDA),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> trainer.TrainConfig:
        try:
            return trainer.TrainConfig(
                learning_rate=self.float_("learning_rate", trainer.DEFAULT_LEARNING_RATE),
                epochs=self.int_("epochs", trainer.DEFAULT_EPOCHS),
                seed=self.int_("seed", 0),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def discriminator_outputs(self) -> losses.DiscriminatorOutputs:
        for key in ("d_i_y", "d_i_xhat", "d_ia_xa", "d_ia_yahat"):
            if key not in self.raw:
                raise ConfigError(f"loss-eval config needs {key}=<float in (0,1)>")
        try:
            return losses.DiscriminatorOutputs(
                d_i_y=self.float_("d_i_y"),
                d_i_xhat=self.float_("d_i_xhat"),
                d_ia_xa=self.float_("d_ia_xa"),
                d_ia_yahat=self.float_("d_ia_yahat"),
            )
        except QsdenoiseError as exc:
            raise ConfigError(str(exc)) from exc


def load_run_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig(raw={})
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    raw: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value.strip()
    return RunConfig(raw=raw)


def _load_volumes(paths: list[str]) -> list[imgio.ImageVolume]:
    return [imgio.load_volume(p) for p in paths]


def _fmt6(x: float) -> str:
    return f"{x:.6g}"


# ------------------------------------------------------------ commands


def cmd_match(args) -> int:
    cfg = load_run_config(args.config)
    ld_paths = cfg.paths("ld_volumes")
    nd_paths = cfg.paths("nd_volumes")
    if not ld_paths or not nd_paths:
        raise ConfigError("match needs ld_volumes and nd_volumes in the config")
    workers = args.workers or cfg.int_("workers", 0) or (os.cpu_count() or 1)
    mc = cfg.match_config()
    ld = _load_volumes(ld_paths)
    nd = _load_volumes(nd_paths)
    t0 = time.perf_counter()
    manifest = matcher.build_manifest(ld, nd, mc, workers=workers)
    wall = time.perf_counter() - t0
    matcher.write_manifest(manifest, args.out)
    if manifest.is_empty:
        print(f"EMPTY\trecords=0\tmean_weight=0\twall_s={wall:.3f}")
    else:
        print(
            f"records={len(manifest.records)}"
            f"\tmean_weight={_fmt6(manifest.mean_weight())}"
            f"\twall_s={wall:.3f}"
        )
    return 0


def cmd_hist(args) -> int:
    cfg = load_run_config(args.config)
    if args.manifest:
        manifest = matcher.read_manifest(args.manifest)
        scores = [r.score for r in manifest.records]
    else:
        ld_paths = cfg.paths("ld_volumes")
        nd_paths = cfg.paths("nd_volumes")
        if not ld_paths or len(ld_paths) != len(nd_paths):
            raise ConfigError(
                "paired hist needs equal-length ld_volumes and nd_volumes"
            )
        mc = cfg.match_config()
        scores = []
        for ld_path, nd_path in zip(ld_paths, nd_paths):
            ld = imgio.load_volume(ld_path)
            nd = imgio.load_volume(nd_path)
            scores.extend(matcher.truly_paired_scores(ld, nd, mc))
    hist = matcher.nmi_histogram(scores, bins=args.bins)
    for i in range(hist.bins):
        lo, hi = hist.edges(i)
        print(f"{_fmt6(lo)}\t{_fmt6(hi)}\t{hist.counts[i]}")
    print(f"mean={_fmt6(hist.mean)}")
    print(f"mode_bin={_fmt6(hist.mode_center)}")
    return 0


def cmd_eval(args) -> int:
    x, x_max = imgio.load_image(args.x)
    y, _ = imgio.load_image(args.y)
    max_val = args.max_val if args.max_val is not None else x_max
    p = metrics.psnr(x, y, max_val=max_val)
    s = metrics.ssim(x, y, data_range=max_val)
    print(f"psnr={'inf' if math.isinf(p) else _fmt6(p)}")
    print(f"ssim={s:.6f}")
    return 0


def cmd_denoise_baseline(args) -> int:
    cfg = load_run_config(args.config)
    img, max_val = imgio.load_image(args.input)
    if args.method == "median":
        out = baselines.median_filter_3x3(img)
    else:
        sigma = args.sigma if args.sigma is not None else cfg.float_("sigma", 55.0)
        try:
            fc = baselines.FreqFilterConfig(sigma=sigma)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        out = baselines.gaussian_lowpass_freq(img, fc)
    imgio.save_image(np.clip(out, 0.0, max_val), args.output, max_val)
    print(f"wrote={args.output}")
    return 0


def cmd_loss_eval(args) -> int:
    cfg = load_run_config(args.config)
    images = [imgio.load_image(p)[0] for p in args.images]
    bundle = losses.DisentangleBundle(*images)
    d = cfg.discriminator_outputs()
    lw = cfg.loss_weights()
    w = cfg.float_("weight", 1.0)
    try:
        report = losses.total_loss(
            bundle, d, lw, w,
            standard_gan_form=cfg.bool_("standard_gan_form", False),
        )
    except QsdenoiseError as exc:
        raise ConfigError(str(exc)) from exc
    for name in ("l_adv", "l_rec", "l_art", "l_self", "total"):
        print(f"{name}={getattr(report, name):.9g}")
    return 0


def cmd_train_toy(args) -> int:
    cfg = load_run_config(args.config)
    manifest = matcher.read_manifest(args.manifest)
    vol_paths = cfg.paths("ld_volumes") + cfg.paths("nd_volumes")
    if not vol_paths:
        raise ConfigError("train-toy needs ld_volumes/nd_volumes in the config")
    volumes = {v.id: v for v in _load_volumes(vol_paths)}
    pairs = trainer.pairs_from_manifest(manifest, volumes)
    k = cfg.int_("kernel_size", trainer.DEFAULT_KERNEL_SIZE)
    tc = cfg.train_config()
    if args.seed is not None:
        tc = trainer.TrainConfig(
            learning_rate=tc.learning_rate, epochs=tc.epochs, seed=args.seed
        )
    model = trainer.gd_train(pairs, k=k, cfg=tc)
    theta = model.theta()
    lines = [str(k)] + [f"{v:.17g}" for v in theta]
    Path(args.out).write_text("\n".join(lines) + "\n")
    objective = trainer.weighted_mse_objective(model, pairs)
    print(f"pairs={len(pairs)}\tobjective={_fmt6(objective)}\twrote={args.out}")
    return 0


# ------------------------------------------------------------ plumbing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value run configuration file")
    common.add_argument("--workers", type=int, help="parallel worker count")
    common.add_argument("--seed", type=int, help="seed override")

    parser = argparse.ArgumentParser(
        prog="qsdenoise",
        description="quasi-supervised patch pairing and denoising toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", parents=[common], help="build a pair manifest")
    p.add_argument("--out", required=True, help="manifest output path")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("hist", parents=[common], help="score histogram table")
    p.add_argument("--manifest", help="manifest file to bin")
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("eval", parents=[common], help="PSNR/SSIM of two images")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--max-val", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "denoise-baseline", parents=[common], help="classical filters"
    )
    p.add_argument("--method", choices=("median", "gauss"), required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_denoise_baseline)

    p = sub.add_parser(
        "loss-eval", parents=[common],
        help="evaluate the weighted loss on a seven-image bundle",
    )
    p.add_argument(
        "images", nargs=7,
        metavar="IMG",
        help="x_a y x_hat y_hat x_a_hat y_a_hat y_tilde",
    )
    p.set_defaults(func=cmd_loss_eval)

    p = sub.add_parser(
        "train-toy", parents=[common], help="train the linear toy denoiser"
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="kernel coefficients file")
    p.set_defaults(func=cmd_train_toy)

    return parser


_EXIT_CONFIG = 2
_EXIT_IO = 3
_EXIT_EMPTY = 4
_EXIT_DIMENSION = 5


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (
        MalformedHeader, TruncatedData, MalformedManifest, MissingVolume,
        FileNotFoundError, OSError,
    ) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return _EXIT_IO
    except (
        EmptyInput, EmptyTarget, EmptySet, AllZeroWeights, EmptyHistogram,
    ) as exc:
        print(f"empty input: {exc}", file=sys.stderr)
        return _EXIT_EMPTY
    except (
        SizeMismatch, DimensionMismatch, PatchTooLarge, OutOfBounds,
        ImageTooSmall,
    ) as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return _EXIT_DIMENSION
    except Divergence as exc:
        print(
            f"config error: {exc} (lower learning_rate; larger patches need "
            "smaller rates)",
            file=sys.stderr,
        )
        return _EXIT_CONFIG
    except (QsdenoiseError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
