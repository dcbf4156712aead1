import math

import numpy as np
import pytest

from trapspec.atom import LaserField, LevelScheme, default_laser_493, default_laser_650
from trapspec.bloch import SteadyStateModel

TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def paper_model() -> SteadyStateModel:
    """Model at the published operating point (defaults)."""
    return SteadyStateModel()


@pytest.fixture(scope="session")
def paper_cooling(paper_model):
    from trapspec.motion import cooling_coefficient

    return cooling_coefficient(paper_model)


def random_two_laser_model(rng: np.random.Generator) -> SteadyStateModel:
    """A random valid (both lasers on, B != 0) configuration."""
    scheme = LevelScheme()
    laser_g = default_laser_493(
        detuning=TWO_PI * rng.uniform(-30e6, 10e6),
        intensity=rng.uniform(200.0, 4000.0),
        scheme=scheme,
    )
    laser_r = default_laser_650(
        detuning=TWO_PI * rng.uniform(-20e6, 20e6),
        intensity=rng.uniform(100.0, 3000.0),
        scheme=scheme,
    )
    return SteadyStateModel(
        laser_g, laser_r, b_field=rng.uniform(0.5e-4, 5e-4), scheme=scheme
    )
