"""Readers/writers for the file formats shared with the matching engine.

These formats are the cross-package contract, reimplemented here so the
harness depends only on the documented byte layouts:

* raw volume: ``<name>.raw`` little-endian uint16 (slice-major, then
  row-major) + ``<name>.hdr`` text sidecar (width/height/slices/min/max);
* PGM: binary P5, maxval 255 or 65535 (16-bit big-endian).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Volume:
    id: str
    slices: np.ndarray  # (n, h, w) float64
    intensity_min: float
    intensity_max: float

    def normalized(self) -> np.ndarray:
        span = self.intensity_max - self.intensity_min
        return (self.slices - self.intensity_min) / span


def load_raw(path: str | Path) -> Volume:
    path = Path(path)
    header = {}
    for line in path.with_suffix(".hdr").read_text().splitlines():
        line = line.strip()
        if line and "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = float(value)
    w, h, n = int(header["width"]), int(header["height"]), int(header["slices"])
    data = np.frombuffer(path.read_bytes(), dtype="<u2")
    if data.size != w * h * n:
        raise ValueError(f"{path}: byte count disagrees with header")
    return Volume(
        id=path.stem,
        slices=data.reshape(n, h, w).astype(np.float64),
        intensity_min=header["min"],
        intensity_max=header["max"],
    )


def save_raw(vol: Volume, path: str | Path) -> None:
    path = Path(path)
    rounded = np.rint(vol.slices)
    if rounded.min() < 0 or rounded.max() > 65535:
        raise ValueError("values do not fit uint16")
    path.write_bytes(rounded.astype("<u2").tobytes())
    n, h, w = vol.slices.shape
    path.with_suffix(".hdr").write_text(
        f"width={w}\nheight={h}\nslices={n}\n"
        f"min={vol.intensity_min!r}\nmax={vol.intensity_max!r}\n"
    )


_PGM_HEADER = re.compile(
    rb"^P5\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)"
    rb"\s(?:\s*#.*[\r\n])*\s*(\d+)\s"
)


def save_pgm(img: np.ndarray, path: str | Path, maxval: int = 255) -> None:
    rounded = np.rint(np.asarray(img, dtype=np.float64))
    rounded = np.clip(rounded, 0, maxval)
    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    h, w = rounded.shape
    Path(path).write_bytes(
        f"P5\n{w} {h}\n{maxval}\n".encode() + rounded.astype(dtype).tobytes()
    )


def load_pgm(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    m = _PGM_HEADER.match(buf)
    if m is None:
        raise ValueError(f"{path} is not a binary P5 PGM")
    w, h, maxval = (int(g) for g in m.groups())
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    pixels = np.frombuffer(buf, dtype=dtype, count=w * h, offset=m.end())
    return pixels.reshape(h, w).astype(np.float64)
