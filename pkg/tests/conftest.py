import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from accelkernel.params import ModelParams

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def real_params() -> ModelParams:
    """The reference point gamma = 1, omega = (2, 1)."""
    return ModelParams.from_frequencies(1.0, 2.0, 1.0)


@pytest.fixture
def complex_params() -> ModelParams:
    """gamma = 1, alpha = 2, beta = 4: R = sqrt(2), phi = pi/6."""
    return ModelParams.from_couplings(1.0, 2.0, 4.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
