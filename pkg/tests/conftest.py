import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from residue_lwe.lwe import make_rng
from residue_lwe.verify import random_system

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SMALL_PRIMES = (2, 3, 11, 97, 65537)


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(12345)


@pytest.fixture
def systems(rng):
    """Forty random systems with a relative degree, over Z_11 and Z_97."""
    return [random_system(rng) for _ in range(40)]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
