import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pymixbf import SceneSpec, Source, render_scene

settings.register_profile(
    "ci", suppress_health_check=(HealthCheck.too_slow,), deadline=None
)
settings.register_profile("dev", max_examples=25, deadline=None)
settings.load_profile("ci" if "CI" in os.environ else "dev")


def complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hpd(rng, dim, batch=()):
    a = complex_normal(rng, tuple(batch) + (dim, 2 * dim))
    return a @ np.conj(np.swapaxes(a, -1, -2)) / (2 * dim) + 0.1 * np.eye(dim)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_scene():
    spec = SceneSpec(
        sources=[Source((0.707, 0.707, 0.0)), Source((-0.866, 0.5, 0.0))],
        rmnr_db=10.0,
        duration=3.5,
        noise_reference_s=2.0,
        seed=7,
    )
    return spec, render_scene(spec)
