import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from itsinfer import kernels  # noqa: E402


@pytest.fixture(params=kernels.backends(), ids=lambda m: m.BACKEND)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
