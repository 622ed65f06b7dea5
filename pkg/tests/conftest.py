import numpy as np
import pytest

import _fixtures


@pytest.fixture
def one_d():
    return _fixtures.one_dim_problem()


@pytest.fixture
def ortho():
    return _fixtures.orthonormal_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
