import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dirackg.grid import Grid3

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def g8():
    return Grid3(8, 6.0)


@pytest.fixture(scope="session")
def g16():
    return Grid3(16, 12.0)


@pytest.fixture(scope="session")
def g32():
    return Grid3(32, 20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_spinor(grid, rng, smooth=1.0):
    """Random smooth spinor: white noise filtered by exp(-smooth |xi|^2)."""
    from dirackg.grid import SpinorField, apply_multiplier
    raw = rng.normal(size=(4,) + grid.shape) + 1j * rng.normal(size=(4,) + grid.shape)
    u = SpinorField(grid, raw)
    return apply_multiplier(u, lambda a, b, c: np.exp(-smooth * (a * a + b * b + c * c)))


ACCEPTANCE = []


def record(number, title, passed, detail):
    ACCEPTANCE.append((number, title, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  [{number}] {title}: {detail}")
