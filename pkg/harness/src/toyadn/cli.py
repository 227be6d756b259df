"""Command line for the toy trainer.

    toyadn gen --out corpus/ [--seed 0]
    toyadn train --manifest pairs.tsv --data corpus/ --mode matched-weighted \
        --log loss.tsv [--denoise-out out/] [--epochs 5] [--seed 0]
    toyadn ablate --manifest pairs.tsv --data corpus/ [--seeds 0,1,2]

The manifest comes from the matching engine (`qsdenoise match`); `gen`
writes the phantom corpus the matcher runs on.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from toyadn.manifest import MODES, parse_manifest
from toyadn.model import DisentangleModel
from toyadn.phantoms import build_corpus
from toyadn.rawio import load_raw
from toyadn.train import (
    HarnessConfig,
    load_pairs,
    mean_test_psnr,
    run_ablation,
    save_denoised_pgm,
    train,
    write_loss_log,
)


def _load_corpus(data_dir: Path):
    volumes = {}
    for path in sorted(data_dir.glob("*.raw")):
        vol = load_raw(path)
        volumes[vol.id] = vol
    test_ld = [v for k, v in sorted(volumes.items()) if k.startswith("test_ld")]
    test_nd = [v for k, v in sorted(volumes.items()) if k.startswith("test_nd")]
    return volumes, test_ld, test_nd


def cmd_gen(args) -> int:
    written = build_corpus(args.out, seed=args.seed)
    for role, paths in written.items():
        print(f"{role}: {', '.join(p.name for p in paths)}")
    return 0


def cmd_train(args) -> int:
    manifest = parse_manifest(args.manifest)
    volumes, test_ld, test_nd = _load_corpus(Path(args.data))
    cfg = HarnessConfig(mode=args.mode, seed=args.seed, epochs=args.epochs)
    pairs = load_pairs(manifest, volumes, mode=cfg.mode, seed=cfg.seed)
    import torch

    torch.manual_seed(cfg.seed)
    model = DisentangleModel(channels=cfg.channels)
    model, rows = train(model, pairs, cfg)
    write_loss_log(rows, cfg, args.log)
    if test_ld and test_nd:
        print(f"test_psnr={mean_test_psnr(model, test_ld, test_nd):.3f}")
    if args.denoise_out:
        for vol in test_ld:
            save_denoised_pgm(model, vol, args.denoise_out)
    print(f"pairs={len(pairs)}\tepochs={cfg.epochs}\tlog={args.log}")
    return 0


def cmd_ablate(args) -> int:
    manifest = parse_manifest(args.manifest)
    volumes, test_ld, test_nd = _load_corpus(Path(args.data))
    seeds = tuple(int(s) for s in args.seeds.split(","))
    cfg = HarnessConfig(epochs=args.epochs)
    result = run_ablation(manifest, volumes, test_ld, test_nd, seeds=seeds, cfg=cfg)
    for mode in MODES:
        print(f"{mode}\t{result.mode_psnr[mode]:.4f}")
    print(f"ordered={'yes' if result.ordered() else 'no'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="toyadn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write the phantom corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one weighting mode")
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=MODES, default="matched-weighted")
    p.add_argument("--log", required=True)
    p.add_argument("--denoise-out")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="compare the three weighting modes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=5)
    p.set_defaults(func=cmd_ablate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
