import pytest
from hypothesis import HealthCheck, settings

from projwishart.rng import RngStream

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return RngStream(12345, 0)
