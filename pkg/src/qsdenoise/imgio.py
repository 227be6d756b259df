"""Volume and patch IO.

Two on-disk formats are supported:

* raw volume: ``<name>.raw`` (little-endian uint16, slice-major then
  row-major) next to a ``<name>.hdr`` text sidecar with lines
  ``width=<int>``, ``height=<int>``, ``slices=<int>``, ``min=<float>``,
  ``max=<float>``.
* PGM: binary P5 single slices, maxval 255 or 65535 (16-bit is
  big-endian per the netpbm spec).

Pixels are promoted to float64 on load; the declared intensity range
comes from the header / format maxval, not from the observed values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qsdenoise.errors import (
    MalformedHeader,
    OutOfBounds,
    PatchTooLarge,
    TruncatedData,
)

RAW_DTYPE = np.dtype("<u2")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageVolume:
    """A stack of equally-sized 2D intensity slices.

    ``slices`` has shape (n_slices, height, width) and is read-only, so
    volumes are safe to share across threads.
    """

    id: str
    slices: np.ndarray
    intensity_min: float
    intensity_max: float

    def __post_init__(self):
        object.__setattr__(self, "slices", _readonly(self.slices))
        if self.slices.ndim != 3 or self.slices.shape[0] < 1:
            raise ValueError("slices must be a non-empty (n, h, w) stack")
        if not self.intensity_min < self.intensity_max:
            raise ValueError("intensity_min must be < intensity_max")
        lo = float(self.slices.min())
        hi = float(self.slices.max())
        if lo < self.intensity_min or hi > self.intensity_max:
            raise ValueError(
                f"pixel values [{lo}, {hi}] exceed the declared range "
                f"[{self.intensity_min}, {self.intensity_max}]"
            )

    @property
    def num_slices(self) -> int:
        return self.slices.shape[0]

    @property
    def height(self) -> int:
        return self.slices.shape[1]

    @property
    def width(self) -> int:
        return self.slices.shape[2]

    @property
    def intensity_range(self) -> tuple[float, float]:
        return (self.intensity_min, self.intensity_max)


@dataclass(frozen=True)
class DatasetEntry:
    volume_id: str
    dose_label: str  # "LD" or "ND"
    file_path: str
    pixel_format: str  # "raw" or "pgm"


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[DatasetEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [e.volume_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("volume ids must be unique")
        for e in self.entries:
            if e.dose_label not in ("LD", "ND"):
                raise ValueError(f"bad dose label {e.dose_label!r}")


@dataclass(frozen=True)
class Patch:
    """A square intensity window plus where it came from."""

    pixels: np.ndarray
    volume_id: str
    slice_index: int
    row: int
    col: int

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 2 or px.shape[0] != px.shape[1]:
            raise ValueError("patch pixels must be square")
        if px.shape[0] < 2:
            raise ValueError("patch size must be >= 2")

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    @property
    def provenance(self) -> tuple[str, int, int, int]:
        return (self.volume_id, self.slice_index, self.row, self.col)


# ---------------------------------------------------------------- raw


def _header_path(raw_path: Path) -> Path:
    return raw_path.with_suffix(".hdr")


def _parse_header(path: Path) -> dict[str, float]:
    if not path.exists():
        raise MalformedHeader(f"missing header sidecar {path}")
    fields: dict[str, float] = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedHeader(f"bad header line {line!r} in {path}")
        key, value = line.split("=", 1)
        try:
            fields[key.strip()] = float(value.strip())
        except ValueError as exc:
            raise MalformedHeader(f"non-numeric value in {line!r}") from exc
    for key in ("width", "height", "slices", "min", "max"):
        if key not in fields:
            raise MalformedHeader(f"header {path} misses {key!r}")
    for key in ("width", "height", "slices"):
        if fields[key] != int(fields[key]) or fields[key] < 1:
            raise MalformedHeader(f"{key} must be a positive integer")
    if not fields["min"] < fields["max"]:
        raise MalformedHeader("header must declare min < max")
    return fields


def _load_raw(path: Path) -> ImageVolume:
    hdr = _parse_header(_header_path(path))
    w, h, n = int(hdr["width"]), int(hdr["height"]), int(hdr["slices"])
    data = path.read_bytes()
    expected = w * h * n * RAW_DTYPE.itemsize
    if len(data) != expected:
        raise TruncatedData(
            f"{path}: got {len(data)} bytes, header declares {expected}"
        )
    pixels = np.frombuffer(data, dtype=RAW_DTYPE).reshape(n, h, w)
    return ImageVolume(
        id=path.stem,
        slices=pixels.astype(np.float64),
        intensity_min=hdr["min"],
        intensity_max=hdr["max"],
    )


def save_raw(vol: ImageVolume, path: str | Path) -> None:
    """Write a volume as .raw + .hdr. Values are rounded to uint16."""
    path = Path(path)
    rounded = np.rint(vol.slices)
    if rounded.min() < 0 or rounded.max() > 65535:
        raise ValueError("pixel values do not fit the raw uint16 format")
    path.write_bytes(rounded.astype(RAW_DTYPE).tobytes())
    _header_path(path).write_text(
        f"width={vol.width}\n"
        f"height={vol.height}\n"
        f"slices={vol.num_slices}\n"
        f"min={vol.intensity_min!r}\n"
        f"max={vol.intensity_max!r}\n"
    )


# ---------------------------------------------------------------- pgm

_PGM_HEADER = re.compile(
    rb"^P5\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)"
    rb"\s(?:\s*#.*[\r\n])*\s*(\d+)\s"
)


def load_pgm(path: str | Path) -> np.ndarray:
    """Read a binary P5 PGM into a float64 2D array."""
    buf = Path(path).read_bytes()
    m = _PGM_HEADER.match(buf)
    if m is None:
        raise MalformedHeader(f"{path} is not a binary P5 PGM")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval not in (255, 65535):
        raise MalformedHeader(f"unsupported PGM maxval {maxval}")
    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    count = width * height
    offset = m.end()
    if len(buf) - offset != count * dtype.itemsize:
        raise TruncatedData(f"{path}: pixel bytes disagree with header")
    pixels = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    return pixels.reshape(height, width).astype(np.float64)


def save_pgm(img: np.ndarray, path: str | Path, maxval: int = 255) -> None:
    if maxval not in (255, 65535):
        raise ValueError("PGM maxval must be 255 or 65535")
    rounded = np.rint(np.asarray(img, dtype=np.float64))
    if rounded.min() < 0 or rounded.max() > maxval:
        raise ValueError("pixel values do not fit the PGM maxval")
    h, w = rounded.shape
    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    header = f"P5\n{w} {h}\n{maxval}\n".encode()
    Path(path).write_bytes(header + rounded.astype(dtype).tobytes())


# ---------------------------------------------------------------- dispatch


def load_volume(path: str | Path) -> ImageVolume:
    """Load a .raw(+.hdr) volume or a .pgm single-slice volume."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lower()
    if suffix == ".raw":
        return _load_raw(path)
    if suffix == ".pgm":
        img = load_pgm(path)
        maxval = float(_pgm_maxval(path))
        return ImageVolume(
            id=path.stem,
            slices=img[np.newaxis, :, :],
            intensity_min=0.0,
            intensity_max=maxval,
        )
    raise MalformedHeader(f"unsupported volume format {suffix!r}")


def _pgm_maxval(path: Path) -> int:
    m = _PGM_HEADER.match(path.read_bytes())
    assert m is not None
    return int(m.group(3))


def load_image(path: str | Path) -> tuple[np.ndarray, float]:
    """Load a single 2D image; returns (pixels, declared max intensity)."""
    vol = load_volume(path)
    if vol.num_slices != 1:
        raise ValueError(f"{path} holds {vol.num_slices} slices, expected 1")
    return vol.slices[0], vol.intensity_max


def save_image(img: np.ndarray, path: str | Path, max_val: float) -> None:
    """Write a single 2D image as .pgm or single-slice .raw."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        save_pgm(img, path, maxval=255 if max_val <= 255 else 65535)
        return
    if path.suffix.lower() == ".raw":
        vol = ImageVolume(
            id=path.stem,
            slices=np.asarray(img, dtype=np.float64)[np.newaxis, :, :],
            intensity_min=0.0,
            intensity_max=float(max_val),
        )
        save_raw(vol, path)
        return
    raise ValueError(f"unsupported image format {path.suffix!r}")


# ---------------------------------------------------------------- patches


def extract_patch(
    vol: ImageVolume, slice_index: int, row: int, col: int, p: int
) -> Patch:
    """Cut the p-by-p window at (row, col) out of one slice."""
    if not 0 <= slice_index < vol.num_slices:
        raise OutOfBounds(f"slice {slice_index} not in volume {vol.id}")
    if p < 2:
        raise ValueError("patch size must be >= 2")
    if row < 0 or col < 0 or row + p > vol.height or col + p > vol.width:
        raise OutOfBounds(
            f"patch ({row},{col},p={p}) exceeds {vol.height}x{vol.width}"
        )
    return Patch(
        pixels=vol.slices[slice_index, row:row + p, col:col + p],
        volume_id=vol.id,
        slice_index=slice_index,
        row=row,
        col=col,
    )


def tile_positions(
    height: int, width: int, p: int, stride: int
) -> list[tuple[int, int]]:
    """Row-major top-left positions of a p-patch tiling at the given stride."""
    if p > min(height, width):
        raise PatchTooLarge(f"p={p} exceeds slice {height}x{width}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return [
        (r, c)
        for r in range(0, height - p + 1, stride)
        for c in range(0, width - p + 1, stride)
    ]


def tile_patches(
    slice_pixels: np.ndarray,
    p: int,
    stride: int,
    volume_id: str = "",
    slice_index: int = 0,
) -> list[Patch]:
    """All in-bounds patches of one slice, in deterministic row-major order."""
    if p < 2:
        raise ValueError("patch size must be >= 2")
    h, w = slice_pixels.shape
    return [
        Patch(
            pixels=slice_pixels[r:r + p, c:c + p],
            volume_id=volume_id,
            slice_index=slice_index,
            row=r,
            col=c,
        )
        for r, c in tile_positions(h, w, p, stride)
    ]
