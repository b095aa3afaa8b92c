import numpy as np
import pytest

from adasize import RiskSpec, generate_synthetic, normalize, shuffle_and_split


@pytest.fixture(scope="session")
def small_train():
    """Normalized logistic data, 512 samples x 12 features."""
    ds, _ = generate_synthetic(512, 12, 1.0, seed=11)
    return normalize(ds)


@pytest.fixture(scope="session")
def split_data():
    ds, _ = generate_synthetic(768, 10, 1.0, seed=4)
    return shuffle_and_split(normalize(ds), 512, seed=9)


@pytest.fixture()
def spec():
    return RiskSpec(loss="logistic", c=1.0, alpha=0.5, gamma=1.0, M=1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
