import numpy as np
import pytest

from treegibbs.gibbs import MINUS, PLUS, ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[0.0, 0.4, 1.1])
def params(request):
    return ModelParams(request.param)


TAILS = [PLUS, MINUS]
