import numpy as np
import pytest

from chasebse import linalg


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _fresh_counter():
    linalg.matvec_counter.reset()
    yield
