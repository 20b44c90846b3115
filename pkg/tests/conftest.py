"""Shared fixtures.

The Lanczos chain design and the 52-mode lattice are the expensive pieces
(a 1001-level star plus full reorthogonalization), so they are built once
per session and reused by every test that needs the standard device.
"""
import math

import numpy as np
import pytest

from aptfilter.lattice import design_chain, standard_lattice


@pytest.fixture(scope="session")
def table_chain():
    """The headline chain: Gamma=0.25, B=4, K=500, port + 50 environment bonds."""
    return design_chain(gamma=0.25, half_bandwidth=4.0, k_levels=500, n_sites=51)


@pytest.fixture(scope="session")
def lattice_52():
    """Two ports + 50-site chain, couplings from table_chain."""
    return standard_lattice(n_env=50, gamma=0.25, half_bandwidth=4.0, k_levels=500)


@pytest.fixture(scope="session")
def small_lattice():
    """A cheap 2 + 10 mode device for tests that only need the topology."""
    return standard_lattice(n_env=10, gamma=0.25, half_bandwidth=4.0, k_levels=60)


def angle_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle."""
    return abs((a - b + math.pi) % (2.0 * math.pi) - math.pi)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260821)
