"""softflow: lumped-parameter simulation of recirculating-flow soft robots."""

from .backend import backend_name
from .fluids import Fluid, IdealGas, default_fluid_library, density_at, kinematic_viscosity

__version__ = "0.1.0"

__all__ = [
    "Fluid",
    "IdealGas",
    "backend_name",
    "default_fluid_library",
    "density_at",
    "kinematic_viscosity",
    "__version__",
]
