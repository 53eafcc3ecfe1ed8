import numpy as np
import pytest

from dsbo.problems import QuadraticBilevel, default_quadratic, synthetic_problem


@pytest.fixture
def scalar_instance():
    """f = (x^2 + y^2) / 2, g = (y - x)^2 / 2 up to a y-independent constant."""
    return QuadraticBilevel(A=[[[1.0]]], B=[[[0.0]]], C=[[[1.0]]], D=[[[1.0]]], E=[[[-1.0]]],
                            a=[[0.0]], c=[[0.0]], d=[[0.0]])


@pytest.fixture
def quad():
    return default_quadratic()


@pytest.fixture
def quad_noisy():
    return default_quadratic(sigma=0.1)


@pytest.fixture
def small_logistic():
    return synthetic_problem(3, 3, 5, (40, 30, 20))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the report."""
    import sys

    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
