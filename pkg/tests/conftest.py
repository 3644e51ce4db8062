import pytest
from hypothesis import HealthCheck, settings

from crackstab.geometry import CrackedRectangle

settings.register_profile(
    "default",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def unit_square():
    """Coarse unit square used by the fast unit tests."""
    return CrackedRectangle(1.0, 1.0, 0.0, 65, 65)
