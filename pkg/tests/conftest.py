import pytest

from dimlab import cantor_2_4, doubling, manneville, middle_thirds, two_parabolic

GOLDEN = 0.6180339887498949  # root of x + x^2 = 1
S_STAR_24 = 0.6942419136306172  # root of 2^-s + 4^-s = 1
LOG2_OVER_LOG3 = 0.6309297535714574


@pytest.fixture(scope="session")
def doubling_map():
    return doubling()


@pytest.fixture(scope="session")
def thirds_map():
    return middle_thirds()


@pytest.fixture(scope="session")
def cantor24_map():
    return cantor_2_4()


@pytest.fixture(scope="session")
def mann_map():
    return manneville(1.0)


@pytest.fixture(scope="session")
def biparabolic_map():
    return two_parabolic()
