import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def full_data():
    from pedcrash.dataset import synthesize_table1

    return synthesize_table1(8319, 7, interactions=True)


@pytest.fixture(scope="session")
def small_data():
    from pedcrash.dataset import synthesize_table1

    return synthesize_table1(600, 3, interactions=True)


@pytest.fixture
def blobs():
    """Three well separated Gaussian clusters in 4 dimensions, 40 rows each."""
    rng = np.random.default_rng(11)
    centers = np.array([[0, 0, 0, 0], [4, 4, 0, 0], [0, 4, 4, 1]], dtype=float)
    X = np.vstack([c + rng.normal(scale=0.8, size=(40, 4)) for c in centers])
    y = np.repeat([0, 1, 2], 40)
    return X, y
