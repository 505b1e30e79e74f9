import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def numpy_path(monkeypatch):
    """Force the pure-numpy kernels for the duration of a test."""
    monkeypatch.setenv("FRACRECON_DISABLE_NUMBA", "1")
    yield
    monkeypatch.delenv("FRACRECON_DISABLE_NUMBA", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
