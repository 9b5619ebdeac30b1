import math

import pytest

from softflow.circuit import Channel
from softflow.fluids import default_fluid_library


@pytest.fixture(scope="session")
def fluids():
    return default_fluid_library()


@pytest.fixture(scope="session")
def water(fluids):
    return fluids["water_20c"]


@pytest.fixture(scope="session")
def air(fluids):
    return fluids["air_20c"]


def channel_for_resistance(r_target: float, mu: float = 1.0e-3, length: float = 0.1) -> Channel:
    """Channel whose laminar resistance equals r_target at viscosity mu."""
    d = (128.0 * mu * length / (math.pi * r_target)) ** 0.25
    return Channel(length=length, hydraulic_diameter=d)
