import pytest

from delone_lab.sets import fibonacci_spec, periodic_spec


@pytest.fixture(scope="session")
def fib():
    return fibonacci_spec()


@pytest.fixture(scope="session")
def torus():
    return periodic_spec(1)
