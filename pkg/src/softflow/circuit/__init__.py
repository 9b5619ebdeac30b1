from .compiled import CompiledNetwork, SolverOptions, compile_network
from .elements import (
    BlockedElementError,
    Channel,
    ComplianceChamber,
    Constriction,
    ConvergenceError,
    Element,
    FlowSource,
    make_network,
    Network,
    NetworkValidationError,
    Node,
    OpenCircuitError,
    PressureSource,
    TeslaValve,
    element_pressure_drop,
)
from .steady import SteadyState, audit_balanced, element_drops, power_audit, solve_steady
from .transient import (
    ControlSchedule,
    TransientStepper,
    TransientTrace,
    simulate_transient,
    split_controls,
)

__all__ = [
    "BlockedElementError",
    "Channel",
    "ComplianceChamber",
    "CompiledNetwork",
    "Constriction",
    "ControlSchedule",
    "ConvergenceError",
    "Element",
    "FlowSource",
    "Network",
    "NetworkValidationError",
    "Node",
    "OpenCircuitError",
    "PressureSource",
    "SolverOptions",
    "SteadyState",
    "TeslaValve",
    "TransientStepper",
    "TransientTrace",
    "audit_balanced",
    "compile_network",
    "element_drops",
    "element_pressure_drop",
    "make_network",
    "power_audit",
    "simulate_transient",
    "solve_steady",
    "split_controls",
]
