import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad


def random_points(n, radius=2.0, centre=0.0, seed=1234):
    """``n`` phase points uniformly on a disc around ``centre``."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=n))
    return centre + r * np.exp(2j * math.pi * rng.uniform(size=n))


def plane_integral(func, radius):
    """Integral of ``func(beta)`` over the square ``|x|, |p| <= radius``."""
    value, _ = dblquad(lambda p, x: func(complex(x, p)), -radius, radius,
                       -radius, radius, epsabs=1e-11, epsrel=1e-11)
    return value


def line_integral(func, lo, hi):
    value, _ = quad(func, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
    return value


@pytest.fixture
def points():
    return random_points(20)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the slow optimisation and oracle tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
