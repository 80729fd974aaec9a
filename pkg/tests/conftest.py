import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rhoweights.exponent import constant_exponent
from rhoweights.grid import build_domain
from rhoweights.parallel import set_thread_cap

settings.register_profile(
    "rhoweights",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("rhoweights")


@pytest.fixture(autouse=True)
def _single_thread():
    set_thread_cap(1)
    yield
    set_thread_cap(1)


@pytest.fixture
def line4():
    """dim 1, L = 1, four cells: centers -0.75, -0.25, 0.25, 0.75."""
    return build_domain(1, 1.0, 4)


@pytest.fixture
def line64():
    return build_domain(1, 4.0, 64)


@pytest.fixture
def square16():
    return build_domain(2, 2.0, 16)


@pytest.fixture
def p2(line64):
    return constant_exponent(line64, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
