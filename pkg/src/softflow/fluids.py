"""Working-fluid property models.

Every pressure-flow law in the circuit module pulls density and viscosity
from a :class:`Fluid`.  Fluids are immutable value objects and can be shared
freely between solves and threads.  Temperature is fixed per scenario; there
are no thermal dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

ATMOSPHERIC_PRESSURE = 101325.0  # Pa absolute; converts gauge to absolute


@dataclass(frozen=True)
class IdealGas:
    """Ideal-gas compressibility: rho = P / (R_s * T)."""

    specific_gas_constant: float  # J/(kg K)
    temperature: float  # K

    def __post_init__(self):
        if self.specific_gas_constant <= 0.0:
            raise ValueError("specific_gas_constant must be positive")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class Fluid:
    name: str
    density_ref: float  # kg/m3, nominal density at the reference state
    dynamic_viscosity: float  # Pa s
    ideal_gas: IdealGas | None = None  # None means incompressible

    def __post_init__(self):
        if self.density_ref <= 0.0:
            raise ValueError(f"fluid {self.name!r}: density_ref must be positive")
        if self.dynamic_viscosity <= 0.0:
            raise ValueError(f"fluid {self.name!r}: dynamic_viscosity must be positive")

    @property
    def compressible(self) -> bool:
        return self.ideal_gas is not None


def density_at(fluid: Fluid, pressure: float) -> float:
    """Density in kg/m3 at an absolute pressure in Pa.

    Incompressible fluids return the configured constant; ideal gases follow
    rho = P / (R_s * T).
    """
    if pressure <= 0.0:
        raise ValueError(f"absolute pressure must be positive, got {pressure}")
    gas = fluid.ideal_gas
    if gas is None:
        return fluid.density_ref
    return pressure / (gas.specific_gas_constant * gas.temperature)


def kinematic_viscosity(fluid: Fluid, pressure: float) -> float:
    """Kinematic viscosity in m2/s at an absolute pressure in Pa."""
    return fluid.dynamic_viscosity / density_at(fluid, pressure)


def reference_density(fluid: Fluid) -> float:
    """Density at atmospheric pressure, used by the volume-flow circuit model."""
    return density_at(fluid, ATMOSPHERIC_PRESSURE)


# Default fluid definitions live here as configuration data, not constants
# baked into formulas: scenario files may override any field or add fluids.
# The air reference density equals 101325 / (287 * 293.15).
DEFAULT_FLUID_DEFS: dict[str, dict] = {
    "water_20c": {
        "density": 998.0,
        "dynamic_viscosity": 1.0e-3,
        "compressibility": "incompressible",
    },
    "air_20c": {
        "density": 1.2041,
        "dynamic_viscosity": 1.8e-5,
        "compressibility": {
            "ideal_gas": {"specific_gas_constant": 287.0, "temperature": 293.15}
        },
    },
}


def fluid_from_config(name: str, spec: dict) -> Fluid:
    """Build a Fluid from a configuration block (see DEFAULT_FLUID_DEFS)."""
    allowed = {"density", "dynamic_viscosity", "compressibility"}
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"fluid {name!r}: unknown keys {sorted(unknown)}")
    try:
        density = float(spec["density"])
        viscosity = float(spec["dynamic_viscosity"])
    except KeyError as exc:
        raise ValueError(f"fluid {name!r}: missing key {exc.args[0]!r}") from None
    comp = spec.get("compressibility", "incompressible")
    if comp == "incompressible":
        gas = None
    elif isinstance(comp, dict) and set(comp) == {"ideal_gas"}:
        gspec = comp["ideal_gas"]
        unknown = set(gspec) - {"specific_gas_constant", "temperature"}
        if unknown:
            raise ValueError(f"fluid {name!r}: unknown ideal_gas keys {sorted(unknown)}")
        gas = IdealGas(
            specific_gas_constant=float(gspec["specific_gas_constant"]),
            temperature=float(gspec["temperature"]),
        )
    else:
        raise ValueError(
            f"fluid {name!r}: compressibility must be 'incompressible' or "
            f"{{'ideal_gas': {{...}}}}"
        )
    return Fluid(name=name, density_ref=density, dynamic_viscosity=viscosity, ideal_gas=gas)


def default_fluid_library() -> dict[str, Fluid]:
    return {name: fluid_from_config(name, spec) for name, spec in DEFAULT_FLUID_DEFS.items()}
