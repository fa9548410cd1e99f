import numpy as np
import pytest

from hyperadams.ball import DimensionParams, RadialFunction, RadialGrid


@pytest.fixture(scope="session")
def dims1():
    return DimensionParams(1)


@pytest.fixture(scope="session")
def dims2():
    return DimensionParams(2)


@pytest.fixture(scope="session")
def dims3():
    return DimensionParams(3)


@pytest.fixture(scope="session")
def geo_grid():
    """Workhorse geodesic grid for smooth decaying profiles."""
    return RadialGrid.geodesic(r_max=9.0, n_elements=20, degree=6, grading=2.5)


@pytest.fixture(scope="session")
def ball_grid():
    """Euclidean-radius grid on the unit ball."""
    return RadialGrid.euclidean_ball(s_max=1.0, n_elements=20, degree=6, grading=1.5)


def gaussian_profile(grid, amp=1.0, rate=1.0):
    return RadialFunction.from_callable(grid, lambda r: amp * np.exp(-rate * r**2))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
