import numpy as np
import pytest

from hetnetlab.geometry import GeometryConfig, TierConfig, default_geometry


@pytest.fixture
def small_geometry():
    """Two tiers in a 1.2 km disc: a few dozen stations, fast to solve."""
    return default_geometry(sim_radius=1.2, obs_radius=0.8, grid_step=0.05)


@pytest.fixture
def single_tier():
    return GeometryConfig(tiers=(TierConfig.from_dbm(4.62, 58.26, "macro"),),
                          sim_radius=1.2, obs_radius=0.8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
