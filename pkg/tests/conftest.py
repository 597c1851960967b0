import numpy as np
import pytest

from momsketch.harness.generators import gen_gaussian_system, gen_pd_system
from momsketch.linalg import LinearSystem, MetricSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def gauss_50x20():
    return gen_gaussian_system(50, 20, seed=7)


@pytest.fixture(scope="session")
def pd_system():
    return gen_pd_system(40, 12, seed=3)


@pytest.fixture(scope="session")
def rank_deficient():
    """30 x 12 system of rank 6 with a consistent right-hand side."""
    r = np.random.default_rng(99)
    A = r.standard_normal((30, 6)) @ r.standard_normal((6, 12))
    return LinearSystem(A, A @ r.standard_normal(12))


@pytest.fixture(scope="session")
def identity20():
    return MetricSpec.identity(20)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get(
        "tests.test_acceptance"
    )
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
