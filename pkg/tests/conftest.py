"""
Shared test fixtures and utilities for pytest.
"""
import os
import sys

import numpy as np
import pytest

# Add the repository root to the path so tests can import powerctl
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from powerctl.link_model import LinkSpec, NoiseConfig, Scenario, dbm_to_watts  # noqa: E402

MACRO_P_MAX_W = float(dbm_to_watts(46.0))


def make_scenario(gains_db, rates, p_max_dbm=46.0, noise=None):
    """Scenario from dB gains and rates; p_max_dbm=None means unbounded."""
    links = tuple(LinkSpec.from_db(g, r) for g, r in zip(gains_db, rates))
    p_max_w = float('inf') if p_max_dbm is None else float(dbm_to_watts(p_max_dbm))
    return Scenario(noise=noise or NoiseConfig.reference(), links=links, p_max_w=p_max_w)


def random_scenario(rng, n_links, p_max_dbm=46.0):
    """Gains uniform in [-120, -80] dB, rates log-uniform in [1e5, 1e7] bit/s."""
    gains = rng.uniform(-120.0, -80.0, n_links)
    rates = 10.0 ** rng.uniform(5.0, 7.0, n_links)
    return make_scenario(gains, rates, p_max_dbm)


@pytest.fixture
def two_link_scenario():
    """Links at -100 dB and -110 dB, 10 Mbit/s each, 46 dBm cap."""
    return make_scenario([-100.0, -110.0], [1e7, 1e7])


@pytest.fixture
def rng():
    """Seeded generator for randomized scenario suites."""
    return np.random.default_rng(20240517)
