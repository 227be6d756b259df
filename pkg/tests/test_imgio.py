import numpy as np
import pytest

from conftest import make_volume
from qsdenoise.errors import (
    MalformedHeader,
    OutOfBounds,
    PatchTooLarge,
    TruncatedData,
)
from qsdenoise.imgio import (
    DatasetEntry,
    DatasetManifest,
    ImageVolume,
    extract_patch,
    load_image,
    load_pgm,
    load_volume,
    save_image,
    save_pgm,
    save_raw,
    tile_patches,
    tile_positions,
)


def write_raw_fixture(tmp_path, name, data, lo=0.0, hi=65535.0):
    vol = ImageVolume(id=name, slices=data, intensity_min=lo, intensity_max=hi)
    path = tmp_path / f"{name}.raw"
    save_raw(vol, path)
    return path


# ------------------------------------------------------------ raw IO


def test_raw_constant_zero_volume(tmp_path):
    path = write_raw_fixture(tmp_path, "zeros", np.zeros((1, 512, 512)))
    vol = load_volume(path)
    assert vol.num_slices == 1
    assert vol.width == vol.height == 512
    assert np.all(vol.slices == 0.0)
    assert vol.intensity_range == (0.0, 65535.0)


def test_raw_truncated_data(tmp_path):
    path = write_raw_fixture(tmp_path, "trunc", np.zeros((1, 512, 512)))
    payload = path.read_bytes()
    path.write_bytes(payload[: 511 * 512 * 2])
    with pytest.raises(TruncatedData):
        load_volume(path)


def test_raw_surplus_bytes_rejected(tmp_path):
    path = write_raw_fixture(tmp_path, "fat", np.zeros((1, 8, 8)))
    path.write_bytes(path.read_bytes() + b"\x00\x00")
    with pytest.raises(TruncatedData):
        load_volume(path)


def test_raw_round_trip_bit_exact(tmp_path):
    i, j, k = np.meshgrid(np.arange(8), np.arange(8), np.arange(3), indexing="ij")
    data = (i + 8 * j + 64 * k).astype(np.float64).transpose(2, 0, 1)
    path = write_raw_fixture(tmp_path, "synth", data, lo=0.0, hi=1000.0)
    vol = load_volume(path)
    assert np.array_equal(vol.slices, data)
    assert vol.intensity_range == (0.0, 1000.0)
    # second round trip is byte-identical
    save_raw(vol, tmp_path / "again.raw")
    assert (tmp_path / "again.raw").read_bytes() == path.read_bytes()


def test_raw_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_volume(tmp_path / "nope.raw")


@pytest.mark.parametrize(
    "text",
    [
        "width=8\nheight=8\n",                                 # missing keys
        "width=8\nheight=8\nslices=x\nmin=0\nmax=1\n",         # non numeric
        "width=8 8\nheight=8\nslices=1\nmin=0\nmax=1\n",       # garbage value
        "width=8\nheight=8\nslices=1\nmin=2\nmax=1\n",         # min >= max
        "width=8.5\nheight=8\nslices=1\nmin=0\nmax=1\n",       # non integer dim
    ],
)
def test_raw_malformed_headers(tmp_path, text):
    raw = tmp_path / "bad.raw"
    raw.write_bytes(b"\x00" * 128)
    (tmp_path / "bad.hdr").write_text(text)
    with pytest.raises(MalformedHeader):
        load_volume(raw)


def test_raw_missing_header_sidecar(tmp_path):
    raw = tmp_path / "solo.raw"
    raw.write_bytes(b"\x00" * 128)
    with pytest.raises(MalformedHeader):
        load_volume(raw)


# ------------------------------------------------------------ pgm IO


def test_pgm_8bit_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (16, 12)).astype(np.float64)
    path = tmp_path / "img.pgm"
    save_pgm(img, path, maxval=255)
    assert np.array_equal(load_pgm(path), img)
    vol = load_volume(path)
    assert vol.intensity_range == (0.0, 255.0)
    assert vol.num_slices == 1


def test_pgm_16bit_round_trip(tmp_path, rng):
    img = rng.integers(0, 65536, (9, 7)).astype(np.float64)
    path = tmp_path / "img16.pgm"
    save_pgm(img, path, maxval=65535)
    assert np.array_equal(load_pgm(path), img)
    assert load_volume(path).intensity_range == (0.0, 65535.0)


def test_pgm_with_comment_header(tmp_path):
    payload = b"P5\n# a comment\n3 2\n255\n" + bytes(range(6))
    path = tmp_path / "c.pgm"
    path.write_bytes(payload)
    assert np.array_equal(load_pgm(path), np.arange(6).reshape(2, 3))


def test_pgm_rejects_ascii_format(tmp_path):
    path = tmp_path / "p2.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
    with pytest.raises(MalformedHeader):
        load_pgm(path)


def test_pgm_truncated_pixels(tmp_path):
    path = tmp_path / "t.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 15)
    with pytest.raises(TruncatedData):
        load_pgm(path)


def test_save_load_image_helpers(tmp_path, rng):
    img = rng.integers(0, 200, (8, 8)).astype(np.float64)
    for name in ("x.pgm", "x.raw"):
        path = tmp_path / name
        save_image(img, path, max_val=255.0)
        loaded, max_val = load_image(path)
        assert np.array_equal(loaded, img)
        assert max_val == 255.0


# ------------------------------------------------------------ volume type


def test_volume_rejects_out_of_range_pixels():
    with pytest.raises(ValueError):
        ImageVolume(id="bad", slices=np.full((1, 4, 4), 2.0),
                    intensity_min=0.0, intensity_max=1.0)


def test_volume_is_immutable():
    vol = make_volume("v", np.zeros((1, 4, 4)))
    with pytest.raises(ValueError):
        vol.slices[0, 0, 0] = 1.0


def test_dataset_manifest_unique_ids():
    entry = DatasetEntry("v1", "LD", "a.raw", "raw")
    with pytest.raises(ValueError):
        DatasetManifest(entries=(entry, entry))
    with pytest.raises(ValueError):
        DatasetManifest(entries=(DatasetEntry("v2", "XX", "b.raw", "raw"),))
    DatasetManifest(entries=(entry, DatasetEntry("v2", "ND", "b.raw", "raw")))


# ------------------------------------------------------------ patches


def test_extract_whole_slice_patch(rng):
    data = rng.random((1, 16, 16))
    vol = make_volume("v", data)
    patch = extract_patch(vol, 0, 0, 0, 16)
    assert np.array_equal(patch.pixels, data[0])
    assert patch.provenance == ("v", 0, 0, 0)


def test_extract_patch_out_of_bounds(rng):
    vol = make_volume("v", rng.random((1, 16, 16)))
    p = 4
    with pytest.raises(OutOfBounds):
        extract_patch(vol, 0, vol.height - p + 1, 0, p)
    with pytest.raises(OutOfBounds):
        extract_patch(vol, 0, -1, 0, p)
    with pytest.raises(OutOfBounds):
        extract_patch(vol, 1, 0, 0, p)


def test_extract_stride_grid_count(rng):
    vol = make_volume("v", rng.random((1, 64, 64)))
    positions = tile_positions(64, 64, 16, 16)
    patches = [extract_patch(vol, 0, r, c, 16) for r, c in positions]
    assert len(patches) == 16  # (floor((64-16)/16)+1)^2


def test_tile_single_patch(rng):
    assert len(tile_patches(rng.random((64, 64)), 64, 1)) == 1


def test_tile_512_grid(rng):
    tiles = tile_patches(rng.random((512, 512)), 64, 64)
    assert len(tiles) == 64  # (floor(448/64)+1)^2 = 8^2


def test_tile_patch_too_large(rng):
    with pytest.raises(PatchTooLarge):
        tile_patches(rng.random((64, 64)), 65, 1)


def test_tile_positions_row_major_distinct(rng):
    positions = tile_positions(32, 48, 8, 5)
    assert len(set(positions)) == len(positions)
    assert positions == sorted(positions)


def test_tile_provenance_reproduces_pixels(rng):
    data = rng.random((2, 32, 32))
    vol = make_volume("v", data)
    for patch in tile_patches(data[1], 8, 8, volume_id="v", slice_index=1):
        again = extract_patch(vol, *patch.provenance[1:], patch.size)
        assert np.array_equal(again.pixels, patch.pixels)
