import numpy as np
import pytest

from rotlasso import DesignMatrix, SeedSpec, normalize_columns


def gaussian_design(n, d, seed=0, stream=0):
    """Random normalized design used across tests."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))
    return normalize_columns(DesignMatrix(rng.standard_normal((n, d))))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
