import os

import numpy as np
import pytest

from reponlab._accel import ENV_VAR, HAVE_NUMBA


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    if request.param == "numba" and not HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setenv(ENV_VAR, request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
