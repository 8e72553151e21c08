import os

import numpy as np
import pytest

from fogfed.dataset import load_har, synth_dataset
from fogfed.neuralnet.network import make_arch
from fogfed.neuralnet.weights import WeightSet

HAR_ENV = "FOGFED_HAR_DIR"


def find_har_dir():
    candidates = []
    if os.environ.get(HAR_ENV):
        candidates.append(os.environ[HAR_ENV])
    candidates.append(os.path.join(os.path.dirname(__file__), "data", "UCI-HAR"))
    for c in candidates:
        if os.path.isdir(c):
            return c
    return None


@pytest.fixture(scope="session")
def har_data():
    """(train, test) from the real UCI-HAR files; skips when the data is absent."""
    d = find_har_dir()
    if d is None:
        pytest.skip(f"UCI-HAR data not found; set {HAR_ENV} or unpack into tests/data/UCI-HAR")
    return load_har(d)


@pytest.fixture(scope="session")
def synth_pinned():
    """The synthetic fixture used across modules: 6 clusters, 420/180 split."""
    return synth_dataset(seed=7, n=600, d=20, c=6)


@pytest.fixture
def tiny_arch():
    """Smallest net exercising every layer kind: d=4, one conv filter, two classes."""
    return make_arch(
        4,
        [("conv1d", 1, 2), ("relu",), ("maxpool1d", 2), ("dense", 2), ("softmax",)],
    )


@pytest.fixture
def tiny_weights():
    """Hand-set weights for the tiny net; the forward oracle below depends on these."""
    return WeightSet(
        [
            np.array([[[0.5, -0.25]]], dtype=np.float32),  # conv kernel (1 filter, 1 ch, k=2)
            np.array([0.1], dtype=np.float32),  # conv bias
            np.array([[1.0, -1.0]], dtype=np.float32),  # dense (1 in, 2 out)
            np.array([0.25, -0.5], dtype=np.float32),  # dense bias
        ]
    )
