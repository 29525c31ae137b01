import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beamcap import ChannelVector

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SKEWED = [3.0, 1.0, 0.5, 0.1]
MILD = [4.0, 3.0, 2.5, 2.0]


@pytest.fixture
def skewed():
    return ChannelVector(SKEWED)


@pytest.fixture
def mild():
    return ChannelVector(MILD)


def random_channel(rng, m):
    return ChannelVector((rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2))
