import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qsdenoise.imgio import ImageVolume


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def make_volume(vol_id, data, lo=0.0, hi=1.0):
    return ImageVolume(id=vol_id, slices=np.asarray(data, dtype=np.float64),
                       intensity_min=lo, intensity_max=hi)


@pytest.fixture
def noisy_pair_32(rng):
    """2 LD + 2 ND volumes of 4 correlated 32x32 slices each."""
    base = rng.random((8, 32, 32))
    ld = [
        make_volume("ldA", np.clip(base[:4] + rng.normal(0, 0.08, (4, 32, 32)), 0, 1)),
        make_volume("ldB", np.clip(base[4:] + rng.normal(0, 0.08, (4, 32, 32)), 0, 1)),
    ]
    nd = [
        make_volume("ndA", np.clip(base[:4] + rng.normal(0, 0.02, (4, 32, 32)), 0, 1)),
        make_volume("ndB", np.clip(base[4:] + rng.normal(0, 0.02, (4, 32, 32)), 0, 1)),
    ]
    return ld, nd
