import numpy as np
import pytest

from privsum.code import make_rs_code

REFERENCE_CODES = [(251, 64, 16), (251, 64, 32), (251, 64, 48), (1021, 255, 224)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_code():
    return make_rs_code(7, 6, 2)
