import pytest

from tiltcage.params import reference_params


@pytest.fixture(scope="session")
def ref():
    return reference_params()


@pytest.fixture(scope="session")
def p(ref):
    return ref[0]


@pytest.fixture(scope="session")
def d(ref):
    return ref[1]


@pytest.fixture(scope="session")
def rp(ref):
    return ref[2]
