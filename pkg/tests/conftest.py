import mpmath
import pytest

mpmath.mp.dps = 40


@pytest.fixture
def mp():
    return mpmath
