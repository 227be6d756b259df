"""Seeded toy corpus: ellipse-stack phantoms with additive correlated noise.

The corpus is built so computational matching faces the same situation
as real unpaired scans: part of the low-dose anatomy has a close
counterpart in the normal-dose set (a jittered "sibling patient"), part
has none. Sibling matches come out with high similarity weights, the
rest with low ones, which is exactly the spread the weighting scheme is
supposed to exploit. A truly paired test split measures denoising PSNR.
All intensities live in a declared [0, 1000] range.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from toyadn.rawio import Volume, save_raw

INTENSITY_MAX = 1000.0


def sample_params(rng: np.random.Generator) -> list[tuple]:
    """Ellipse parameters of one slice: (cy, cx, ay, ax, angle, level)."""
    shapes = [(0.5, 0.5, 0.46, 0.40, 0.0, 0.35)]
    for _ in range(int(rng.integers(4, 8))):
        shapes.append((
            float(rng.uniform(0.25, 0.75)), float(rng.uniform(0.25, 0.75)),
            float(rng.uniform(0.06, 0.22)), float(rng.uniform(0.06, 0.22)),
            float(rng.uniform(0, np.pi)), float(rng.uniform(0.3, 0.85)),
        ))
    return shapes


def jitter_params(
    params: list[tuple], rng: np.random.Generator, scale: float = 1.0
) -> list[tuple]:
    """A sibling anatomy: same structures, moved and rescaled a little."""
    jittered = []
    for cy, cx, ay, ax, angle, level in params:
        jittered.append((
            cy + rng.normal(0, 0.015 * scale), cx + rng.normal(0, 0.015 * scale),
            ay * rng.uniform(1 - 0.08 * scale, 1 + 0.08 * scale),
            ax * rng.uniform(1 - 0.08 * scale, 1 + 0.08 * scale),
            angle + rng.normal(0, 0.08 * scale), level + rng.normal(0, 0.02),
        ))
    return jittered


def render_phantom(params: list[tuple], size: int) -> np.ndarray:
    img = np.full((size, size), 0.18)
    yy, xx = np.mgrid[0:size, 0:size]
    for cy, cx, ay, ax, angle, level in params:
        cos_t, sin_t = np.cos(angle), np.sin(angle)
        u = (xx - cx * size) * cos_t + (yy - cy * size) * sin_t
        v = -(xx - cx * size) * sin_t + (yy - cy * size) * cos_t
        img[(u / (ax * size)) ** 2 + (v / (ay * size)) ** 2 <= 1.0] = np.clip(
            level, 0.0, 1.0
        )
    return img


def correlated_noise(
    rng: np.random.Generator, shape: tuple[int, int], sigma: float
) -> np.ndarray:
    """White noise smoothed with a 3x3 box, rescaled back to sigma."""
    white = rng.normal(0.0, 1.0, (shape[0] + 2, shape[1] + 2))
    smooth = sum(
        white[di:di + shape[0], dj:dj + shape[1]]
        for di in range(3)
        for dj in range(3)
    ) / 9.0
    return smooth * (sigma / smooth.std())


def edge_map(img: np.ndarray) -> np.ndarray:
    """Gradient magnitude normalized to [0, 1]."""
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    return mag / peak if peak > 0 else mag


def ghost_rings(rng: np.random.Generator, size: int, count: int = 4) -> np.ndarray:
    """Thin elliptical rims mimicking streak/ring artifacts.

    These look like anatomy edges, so nothing short of matched clean
    examples can tell them apart from real structure.
    """
    art = np.zeros((size, size))
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(count):
        cy, cx = rng.uniform(0.2, 0.8, 2) * size
        ay, ax = rng.uniform(0.08, 0.35, 2) * size
        angle = rng.uniform(0, np.pi)
        amp = rng.uniform(0.10, 0.20) * rng.choice((-1.0, 1.0))
        cos_t, sin_t = np.cos(angle), np.sin(angle)
        u = (xx - cx) * cos_t + (yy - cy) * sin_t
        v = -(xx - cx) * sin_t + (yy - cy) * cos_t
        radial = np.sqrt((u / ax) ** 2 + (v / ay) ** 2)
        art += amp * np.exp(-((radial - 1.0) / 0.06) ** 2)
    return art


def low_dose_noise(
    rng: np.random.Generator, clean: np.ndarray, sigma: float
) -> np.ndarray:
    """Anatomy-coupled artifact field: ghost rims plus edge-heavy noise.

    Low-dose artifacts concentrate around dense structures and imitate
    them, so an artifact pattern transfers realistically only onto
    similar anatomy; that interaction is what patch matching exploits.
    """
    field = correlated_noise(rng, clean.shape, 1.0)
    amplitude = 0.35 + 2.5 * edge_map(clean)
    noise = field * amplitude
    noise *= sigma / noise.std()
    return noise + ghost_rings(rng, clean.shape[0])


def _box3(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="edge")
    return sum(
        padded[di:di + img.shape[0], dj:dj + img.shape[1]]
        for di in range(3)
        for dj in range(3)
    ) / 9.0


def off_protocol(stack: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A volume reconstructed under a softer protocol.

    Heavily smoothed with a mild intensity drift: structures stay
    recognizable (so it can still be the best available match), but as
    a training target it teaches the denoiser to oversmooth and drift.
    """
    blurred = np.stack([_box3(_box3(img)) for img in stack])
    return 0.9 * blurred + rng.normal(0.0, 0.01, stack.shape)


def build_corpus(
    out_dir: str | Path,
    seed: int = 0,
    size: int = 64,
    slices: int = 4,
    noise_sigma: float = 0.08,
) -> dict[str, list[Path]]:
    """Write the toy corpus; returns the path lists per role.

    The ND pool is a realistic mixed bag: ld0's anatomy has a clean
    jittered sibling (good matches, high weights), ld1's anatomy exists
    only inside an off-protocol volume (its best matches are real but
    miscalibrated, low weights), and one more off-protocol volume holds
    unrelated anatomy. Computational matching therefore curates the
    pool, and the recorded weights grade how trustworthy each surviving
    pair is. Test volumes are truly paired clean/noisy acquisitions of
    unseen anatomy from the same distribution.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    written: dict[str, list[Path]] = {"ld": [], "nd": [], "test_ld": [], "test_nd": []}

    def save(name, stack, role):
        vol = Volume(
            id=name,
            slices=np.clip(stack, 0, 1) * INTENSITY_MAX,
            intensity_min=0.0,
            intensity_max=INTENSITY_MAX,
        )
        path = out_dir / f"{name}.raw"
        save_raw(vol, path)
        written[role].append(path)

    def noisy(stack):
        return np.stack([
            img + low_dose_noise(rng, img, noise_sigma) for img in stack
        ])

    ld0_params = [sample_params(rng) for _ in range(slices)]
    ld1_params = [sample_params(rng) for _ in range(slices)]

    ld0 = np.stack([render_phantom(p, size) for p in ld0_params])
    ld1 = np.stack([render_phantom(p, size) for p in ld1_params])
    save("ld0", noisy(ld0), "ld")
    save("ld1", noisy(ld1), "ld")

    sibling0 = np.stack([
        render_phantom(jitter_params(p, rng), size) for p in ld0_params
    ])
    save("nd0", sibling0, "nd")
    # ld1's only structural counterpart: coarsely aligned and off-protocol
    sibling1 = np.stack([
        render_phantom(jitter_params(p, rng, scale=1.2), size)
        for p in ld1_params
    ])
    save("nd1", off_protocol(sibling1, rng), "nd")
    unrelated = np.stack([
        render_phantom(sample_params(rng), size) for _ in range(slices)
    ])
    save("nd2", off_protocol(unrelated, rng), "nd")

    for k in range(2):
        clean = np.stack([
            render_phantom(sample_params(rng), size) for _ in range(2)
        ])
        save(f"test_nd{k}", clean, "test_nd")
        save(f"test_ld{k}", noisy(clean), "test_ld")
    return written
