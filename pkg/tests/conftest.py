from pathlib import Path

import numpy as np
import pytest

from equinmf.dataviews import load_mfeat

DATA = Path(__file__).resolve().parents[1] / "data" / "mfeat"
FOURIER = DATA / "mfeat-fou"
PIXEL = DATA / "mfeat-pix"


@pytest.fixture(scope="session")
def digits():
    if not (FOURIER.exists() and PIXEL.exists()):
        pytest.skip("mfeat files not present under data/mfeat")
    return load_mfeat(FOURIER, PIXEL)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
