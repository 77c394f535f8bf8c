import pytest

from utilities import get_dimension_cap, make_rng, set_dimension_cap


@pytest.fixture
def rng():
    return make_rng(20240611)


@pytest.fixture
def dimension_cap():
    """Restores the global dimension cap after a test lowers it."""
    previous = get_dimension_cap()
    yield set_dimension_cap
    set_dimension_cap(previous)
