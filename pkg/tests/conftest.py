import pytest

from mfnc.model import ModelParams, RateFunction


@pytest.fixture
def small_params():
    return ModelParams(n_neurons=32, horizon=1.0, base_seed=7)


@pytest.fixture
def const_params():
    return ModelParams(n_neurons=50, rate_fn=RateFunction("constant", 1.5, 1.5), base_seed=11)
