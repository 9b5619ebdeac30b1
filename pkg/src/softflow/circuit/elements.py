"""Fluidic circuit graph: nodes, two-terminal elements, networks.

The electrical analogy used throughout: volumetric flow plays the role of
current, gauge pressure the role of potential, and reservoirs are the fixed
rails.  Element flows are signed positive in the from -> to direction, and
the drop of a passive element is dp = p_from - p_to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..fluids import Fluid

Q_SMOOTH_DEFAULT = 1e-9  # m3/s, cubic-blend half-width for the quadratic law
EPSILON_OPEN_DEFAULT = 1e-6  # openings at or below this are treated as blocked


class NetworkValidationError(ValueError):
    """Malformed network: bad ids, bad parameters or missing reservoirs."""


class BlockedElementError(ValueError):
    """A constriction with zero opening was used where flow is required."""


class OpenCircuitError(RuntimeError):
    """A source has no return path, or part of the network floats."""


class ConvergenceError(RuntimeError):
    """Newton iteration failed; carries the last residual norms."""

    def __init__(self, message, kcl_residual=float("nan"), law_residual=float("nan"),
                 time=None):
        super().__init__(message)
        self.kcl_residual = kcl_residual
        self.law_residual = law_residual
        self.time = time


@dataclass(frozen=True)
class Channel:
    """Straight duct with laminar viscous resistance R = 128 mu L / (pi d^4)."""

    length: float
    hydraulic_diameter: float

    def __post_init__(self):
        if self.length <= 0.0 or self.hydraulic_diameter <= 0.0:
            raise NetworkValidationError("channel geometry must be positive")

    def resistance(self, dynamic_viscosity: float) -> float:
        return 128.0 * dynamic_viscosity * self.length / (math.pi * self.hydraulic_diameter**4)

    def area(self) -> float:
        return math.pi * self.hydraulic_diameter**2 / 4.0

    def inertance(self, density: float) -> float:
        return density * self.length / self.area()


@dataclass(frozen=True)
class Constriction:
    """Variable orifice, quadratic law dp = rho Q |Q| / (2 (Cd A opening)^2)."""

    reference_area: float
    opening: float = 1.0
    discharge_coefficient: float = 0.62

    def __post_init__(self):
        if self.reference_area <= 0.0:
            raise NetworkValidationError("constriction reference_area must be positive")
        if not 0.0 <= self.opening <= 1.0:
            raise NetworkValidationError("constriction opening must be in [0, 1]")
        if self.discharge_coefficient <= 0.0:
            raise NetworkValidationError("discharge coefficient must be positive")

    def quadratic_coefficient(self, density: float, opening: float | None = None) -> float:
        op = self.opening if opening is None else opening
        if op <= 0.0:
            raise BlockedElementError("constriction is blocked (opening = 0)")
        eff = self.discharge_coefficient * self.reference_area * op
        return density / (2.0 * eff * eff)


@dataclass(frozen=True)
class TeslaValve:
    """No-moving-part diode: linear resistance, higher against reverse flow."""

    base_resistance: float  # Pa s/m3, applies to forward (from -> to) flow
    diodicity: float  # reverse resistance = base * diodicity

    def __post_init__(self):
        if self.base_resistance <= 0.0:
            raise NetworkValidationError("tesla valve base_resistance must be positive")
        if self.diodicity <= 1.0:
            raise NetworkValidationError("tesla valve diodicity must exceed 1")


@dataclass(frozen=True)
class FlowSource:
    """Positive-displacement pump: imposes q_set from -> to regardless of dp."""

    q_set: float


@dataclass(frozen=True)
class PressureSource:
    """Regulator: holds p_to - p_from = p_set, passing whatever flow results."""

    p_set: float


@dataclass(frozen=True)
class ComplianceChamber:
    """Elastic storage, V = rest_volume + compliance * dp (dp across the element).

    Attach with `to` at the main reservoir so dp is the chamber gauge pressure.
    At steady state the stored volume is constant and the element carries no
    flow; it only matters in transient solves.
    """

    rest_volume: float
    compliance: float  # m3/Pa

    def __post_init__(self):
        if self.rest_volume <= 0.0 or self.compliance <= 0.0:
            raise NetworkValidationError("chamber volume and compliance must be positive")


Law = Channel | Constriction | TeslaValve | FlowSource | PressureSource | ComplianceChamber

PASSIVE_LAWS = (Channel, Constriction, TeslaValve)
SOURCE_LAWS = (FlowSource, PressureSource)


@dataclass(frozen=True)
class Node:
    id: str
    reservoir_pressure: float | None = None  # Pa gauge; None means interior

    @property
    def is_reservoir(self) -> bool:
        return self.reservoir_pressure is not None


@dataclass(frozen=True)
class Element:
    id: str
    from_node: str
    to_node: str
    law: Law

    def __post_init__(self):
        if self.from_node == self.to_node:
            raise NetworkValidationError(f"element {self.id!r}: from and to must differ")


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    elements: tuple[Element, ...]
    fluid: Fluid
    node_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for node in self.nodes:
            if node.id in index:
                raise NetworkValidationError(f"duplicate node id {node.id!r}")
            index[node.id] = node
        seen = set()
        for el in self.elements:
            if el.id in seen:
                raise NetworkValidationError(f"duplicate element id {el.id!r}")
            seen.add(el.id)
            for nid in (el.from_node, el.to_node):
                if nid not in index:
                    raise NetworkValidationError(
                        f"element {el.id!r} references unknown node {nid!r}"
                    )
        object.__setattr__(self, "node_index", index)
        for comp in _components(self.nodes, self.elements):
            if not any(index[nid].is_reservoir for nid in comp):
                raise NetworkValidationError(
                    f"connected component {sorted(comp)} has no reservoir node"
                )

    def element(self, element_id: str) -> Element:
        for el in self.elements:
            if el.id == element_id:
                return el
        raise KeyError(element_id)


def make_network(nodes, elements, fluid: Fluid) -> Network:
    return Network(nodes=tuple(nodes), elements=tuple(elements), fluid=fluid)


def _components(nodes, elements):
    """Connected components over all elements (node id sets)."""
    parent = {n.id: n.id for n in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for el in elements:
        ra, rb = find(el.from_node), find(el.to_node)
        if ra != rb:
            parent[ra] = rb
    groups: dict[str, set] = {}
    for n in nodes:
        groups.setdefault(find(n.id), set()).add(n.id)
    return list(groups.values())


def smoothed_quadratic_drop(q: float, k: float, q_smooth: float) -> float:
    """Quadratic drop k Q |Q| with a C1 cubic blend inside |Q| < q_smooth.

    The blend keeps a nonzero slope at Q = 0 so the solve Jacobian never
    goes singular through a constriction.
    """
    if abs(q) >= q_smooth:
        return k * q * abs(q)
    return 0.5 * k * q_smooth * q + 0.5 * (k / q_smooth) * q**3


def element_pressure_drop(element: Element, flow: float, fluid: Fluid,
                          q_smooth: float = Q_SMOOTH_DEFAULT) -> float:
    """Signed pressure drop (p_from - p_to) of a passive element at a given flow.

    Raises BlockedElementError for a fully closed constriction (it must be
    removed from a solve instead) and ValueError for source laws.
    """
    from ..fluids import reference_density

    law = element.law
    if isinstance(law, Channel):
        return law.resistance(fluid.dynamic_viscosity) * flow
    if isinstance(law, Constriction):
        k = law.quadratic_coefficient(reference_density(fluid))
        return smoothed_quadratic_drop(flow, k, q_smooth)
    if isinstance(law, TeslaValve):
        r = law.base_resistance if flow >= 0.0 else law.base_resistance * law.diodicity
        return r * flow
    raise ValueError(f"element {element.id!r} is not a passive law")
