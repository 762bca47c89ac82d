import numpy as np
import pytest

from seirgame import load_scenario, make_params


@pytest.fixture(scope="session")
def demo():
    return load_scenario("ny-nj-pa-demo")


@pytest.fixture
def one_region():
    """Single region with round numbers, handy for hand arithmetic."""
    return make_params([100.0], [[0.5]], gamma=0.2, lam=0.1, kappa=0.01, theta=0.8,
                       sigma_s=0.0, sigma_e=0.0, w=2.0, chi=10.0, p=0.5, c=4.0,
                       a=3.0, r=0.0, horizon=10.0)


@pytest.fixture
def two_regions():
    return make_params([2.0, 1.0], [[0.4, 0.1], [0.2, 0.3]], gamma=0.3, lam=0.2,
                       kappa=0.02, theta=0.9, sigma_s=[0.3, 0.2], sigma_e=[0.1, 0.4],
                       w=1.5, chi=5.0, p=0.1, c=2.0, a=1.0, r=0.01, horizon=5.0)


def state(s, e, i):
    return np.concatenate([np.atleast_1d(s), np.atleast_1d(e), np.atleast_1d(i)]).astype(float)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
