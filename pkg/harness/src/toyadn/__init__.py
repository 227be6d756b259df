"""Toy artifact-disentanglement trainer driven by qsmatch pair manifests."""

from toyadn.manifest import Manifest, PairSet, load_pairs, parse_manifest
from toyadn.model import Bundle, DisentangleModel
from toyadn.phantoms import build_corpus
from toyadn.rawio import Volume, load_pgm, load_raw, save_pgm, save_raw
from toyadn.train import (
    HarnessConfig,
    export_bundles,
    mean_test_psnr,
    run_ablation,
    train,
    write_loss_log,
)

__version__ = "0.1.0"
