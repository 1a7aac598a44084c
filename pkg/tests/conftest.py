import numpy as np
import pytest

from gcpower import models


@pytest.fixture(scope="session")
def circle():
    return models.builtin("circle_double_well")


@pytest.fixture(scope="session")
def single_well():
    return models.builtin("single_well_rotational")


@pytest.fixture(scope="session")
def gradient_only():
    return models.builtin("pure_gradient")


@pytest.fixture(scope="session")
def base_point(circle):
    return circle.reference_loop.nodes[0].copy()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
