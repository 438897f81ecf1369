"""Shared fixtures: small deterministic datasets reused across test modules."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rwtkit.dataset import synth_generate

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_xy():
    """A 10-feature regression set with smooth structure plus mild noise."""
    g = np.random.default_rng(7)
    x = g.uniform(0.0, 1.0, size=(120, 10))
    y = 0.8 * x[:, 0] - 0.3 * x[:, 2] + 0.1 * np.sin(6.0 * x[:, 3]) + 0.02 * g.normal(size=120)
    return x, y


@pytest.fixture(scope="session")
def synth_small():
    """24 noiseless synthetic profiles over 3 reservoirs (120 samples)."""
    return synth_generate(24, samples_per_profile=5, noise_sigma=0.0, seed=3, n_reservoirs=3)
