import pytest
from hypothesis import given, strategies as st

from softflow.fluids import (
    Fluid,
    IdealGas,
    default_fluid_library,
    density_at,
    fluid_from_config,
    kinematic_viscosity,
    reference_density,
)


def test_incompressible_density_ignores_pressure():
    water = Fluid("w", density_ref=998.0, dynamic_viscosity=1e-3)
    assert density_at(water, 101325.0) == 998.0
    assert density_at(water, 5e5) == 998.0


def test_ideal_gas_density_reference_point():
    air = Fluid("a", density_ref=1.2, dynamic_viscosity=1.8e-5,
                ideal_gas=IdealGas(287.0, 293.15))
    rho = density_at(air, 101325.0)
    assert rho == pytest.approx(101325.0 / (287.0 * 293.15), rel=1e-12)
    assert rho == pytest.approx(1.2041, rel=1e-3)


def test_ideal_gas_density_is_linear_in_pressure():
    air = Fluid("a", density_ref=1.2, dynamic_viscosity=1.8e-5,
                ideal_gas=IdealGas(287.0, 293.15))
    assert density_at(air, 2.0 * 101325.0) == pytest.approx(2.0 * density_at(air, 101325.0),
                                                            rel=1e-15)


def test_kinematic_viscosity_examples():
    water = Fluid("w", density_ref=1000.0, dynamic_viscosity=1.0e-3)
    assert kinematic_viscosity(water, 101325.0) == pytest.approx(1.0e-6, rel=1e-12)
    gas = Fluid("g", density_ref=1.2, dynamic_viscosity=1.8e-5,
                ideal_gas=IdealGas(specific_gas_constant=287.0, temperature=293.15))
    p = 1.2 * 287.0 * 293.15  # pressure at which rho = 1.2
    assert kinematic_viscosity(gas, p) == pytest.approx(1.5e-5, rel=1e-12)


def test_incompressible_kinematic_viscosity_pressure_independent():
    water = Fluid("w", density_ref=998.0, dynamic_viscosity=1e-3)
    assert kinematic_viscosity(water, 1e5) == kinematic_viscosity(water, 9e5)


def test_non_positive_pressure_rejected():
    water = Fluid("w", density_ref=998.0, dynamic_viscosity=1e-3)
    with pytest.raises(ValueError):
        density_at(water, 0.0)
    with pytest.raises(ValueError):
        density_at(water, -10.0)


@given(st.floats(min_value=1.0, max_value=1e7),
       st.floats(min_value=1.0, max_value=1e7))
def test_gas_density_monotone_in_pressure(p1, p2):
    gas = Fluid("g", density_ref=1.2, dynamic_viscosity=1.8e-5,
                ideal_gas=IdealGas(287.0, 293.15))
    lo, hi = sorted((p1, p2))
    assert density_at(gas, lo) <= density_at(gas, hi)


def test_property_accessors_are_pure():
    gas = Fluid("g", density_ref=1.2, dynamic_viscosity=1.8e-5,
                ideal_gas=IdealGas(287.0, 293.15))
    assert density_at(gas, 2.5e5) == density_at(gas, 2.5e5)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        Fluid("bad", density_ref=-1.0, dynamic_viscosity=1e-3)
    with pytest.raises(ValueError):
        Fluid("bad", density_ref=1.0, dynamic_viscosity=0.0)
    with pytest.raises(ValueError):
        IdealGas(specific_gas_constant=287.0, temperature=0.0)


def test_default_library_contents():
    lib = default_fluid_library()
    assert lib["water_20c"].ideal_gas is None
    assert lib["water_20c"].density_ref == 998.0
    assert lib["air_20c"].ideal_gas is not None
    assert reference_density(lib["air_20c"]) == pytest.approx(1.2041, rel=1e-3)


def test_fluid_from_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown keys"):
        fluid_from_config("x", {"density": 1.0, "dynamic_viscosity": 1.0, "color": "red"})
    with pytest.raises(ValueError, match="missing key"):
        fluid_from_config("x", {"density": 1.0})
