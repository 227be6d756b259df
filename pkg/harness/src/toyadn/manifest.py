"""qsmatch pair-manifest parsing and pair materialization.

The manifest format is the contract with the matching engine:

    #qsmatch v1 p=<int> stride=<int> metric=<name[:params]> threshold=<float> topk=<int>
    ld_vol  ld_slice  ld_row  ld_col  nd_vol  nd_slice  nd_row  nd_col  score  weight

Three weighting modes select the ablation arm:

    matched-weighted    pairs and weights exactly as recorded
    matched-unweighted  same pairs, every weight forced to 1
    unpaired-random     a random ND patch replaces each match (seeded), w=1
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from toyadn.rawio import Volume

MODES = ("unpaired-random", "matched-unweighted", "matched-weighted")


class MalformedManifest(ValueError):
    pass


class MissingVolume(KeyError):
    pass


@dataclass(frozen=True)
class Record:
    ld_vol: str
    ld_slice: int
    ld_row: int
    ld_col: int
    nd_vol: str
    nd_slice: int
    nd_row: int
    nd_col: int
    score: float
    weight: float


@dataclass(frozen=True)
class Manifest:
    p: int
    stride: int
    metric: str
    threshold: float
    top_k: int
    records: tuple[Record, ...]


def parse_manifest(path: str | Path) -> Manifest:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#qsmatch v1 "):
        raise MalformedManifest(f"{path} lacks the '#qsmatch v1' header")
    header = {}
    for token in lines[0][len("#qsmatch v1"):].split():
        key, _, value = token.partition("=")
        if not value:
            raise MalformedManifest(f"bad header token {token!r}")
        header[key] = value
    try:
        p = int(header["p"])
        stride = int(header["stride"])
        metric = header["metric"]
        threshold = float(header["threshold"])
        top_k = int(header["topk"])
    except (KeyError, ValueError) as exc:
        raise MalformedManifest(f"bad header in {path}: {exc}") from exc
    records = []
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != 10:
            raise MalformedManifest(f"record needs 10 fields: {ln!r}")
        records.append(Record(
            parts[0], int(parts[1]), int(parts[2]), int(parts[3]),
            parts[4], int(parts[5]), int(parts[6]), int(parts[7]),
            float(parts[8]), float(parts[9]),
        ))
    return Manifest(p, stride, metric, threshold, top_k, tuple(records))


@dataclass
class PairSet:
    """Stacked normalized patch pairs ready for training."""

    ld: np.ndarray       # (n, p, p) in [0, 1]
    nd: np.ndarray       # (n, p, p) in [0, 1]
    weights: np.ndarray  # (n,) in [0, 1]

    def __len__(self) -> int:
        return self.ld.shape[0]


def _patch(vol: Volume, slice_index: int, row: int, col: int, p: int) -> np.ndarray:
    return vol.normalized()[slice_index, row:row + p, col:col + p]


def load_pairs(
    manifest: Manifest,
    volumes: dict[str, Volume],
    mode: str = "matched-weighted",
    seed: int = 0,
) -> PairSet:
    """Materialize manifest records under the chosen weighting mode."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    for rec in manifest.records:
        for vid in (rec.ld_vol, rec.nd_vol):
            if vid not in volumes:
                raise MissingVolume(vid)
    rng = np.random.default_rng(seed)
    nd_ids = sorted({rec.nd_vol for rec in manifest.records})
    p = manifest.p
    ld_patches, nd_patches, weights = [], [], []
    for rec in manifest.records:
        ld_patches.append(_patch(volumes[rec.ld_vol], rec.ld_slice, rec.ld_row, rec.ld_col, p))
        if mode == "unpaired-random":
            vol = volumes[nd_ids[rng.integers(len(nd_ids))]]
            s = int(rng.integers(vol.slices.shape[0]))
            row = int(rng.integers(vol.slices.shape[1] - p + 1))
            col = int(rng.integers(vol.slices.shape[2] - p + 1))
            nd_patches.append(_patch(vol, s, row, col, p))
            weights.append(1.0)
        else:
            nd_patches.append(_patch(volumes[rec.nd_vol], rec.nd_slice, rec.nd_row, rec.nd_col, p))
            weights.append(1.0 if mode == "matched-unweighted" else rec.weight)
    return PairSet(
        ld=np.stack(ld_patches),
        nd=np.stack(nd_patches),
        weights=np.asarray(weights, dtype=np.float64),
    )
