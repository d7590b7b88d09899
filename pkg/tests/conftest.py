import numpy as np
import pytest

from caltag.config import RadarConfig, load_config


@pytest.fixture(scope="session")
def cfg():
    return RadarConfig()


@pytest.fixture(scope="session")
def small_cfg():
    """Short frame for tests that only need the signal model, not detection."""
    return RadarConfig(chirp_duration_s=128 / 2e6, samples_per_chirp=128, chirps_per_frame=16, num_antennas=4)


@pytest.fixture
def settings():
    return load_config()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
