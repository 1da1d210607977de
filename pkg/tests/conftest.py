import numpy as np
import pytest

import gdcv


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_data(rng):
    """30 x 50 overparameterized Gaussian instance with a linear response."""
    X = rng.standard_normal((30, 50))
    beta = rng.standard_normal(50) / np.sqrt(50)
    y = X @ beta + rng.standard_normal(30)
    return gdcv.build_dataset(X, y)
