"""Multi-actuator robots: the three-port gripper and the quadruped.

The gripper joins two actuators at a shared middle port.  Supplying the
middle splits flow through both fingers in parallel (vents at the ends);
blocking the middle and supplying one end chains the fingers in series,
which is what lets three control inputs drive two fingers independently.

Finger B is mounted mirrored (its outer chain faces the right port), so in
parallel mode both fingers see the same chamber pressure difference and
curl together; series mode produces opposite signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .actuator import (
    ActuatorFragment,
    ActuatorModel,
    ActuatorRig,
    SourceSpec,
    VentSpec,
    actuator_state,
    build_actuator_network,
)
from .circuit import (
    ConvergenceError,
    Element,
    Network,
    Node,
    OpenCircuitError,
    SolverOptions,
    SteadyState,
    make_network,
    solve_steady,
)
from .fluids import Fluid

KAPPA_ZERO = 1e-3  # 1/m, dead band for classifying a finger as neutral

PORT_NAMES = ("left", "middle", "right")


class ConfigurationError(ValueError):
    """Inconsistent port roles (e.g. zero or two supplies)."""


@dataclass(frozen=True)
class Supply:
    direction: str = "forward"

    def __post_init__(self):
        if self.direction not in ("forward", "reverse"):
            raise ConfigurationError("supply direction must be 'forward' or 'reverse'")


@dataclass(frozen=True)
class Vent:
    opening: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.opening <= 1.0:
            raise ConfigurationError("vent opening must be in [0, 1]")


@dataclass(frozen=True)
class Blocked:
    pass


PortRole = Supply | Vent | Blocked


@dataclass(frozen=True)
class GripperAssembly:
    actuator_a: ActuatorModel = ActuatorModel()
    actuator_b: ActuatorModel = ActuatorModel()
    port_left: PortRole = Vent(1.0)
    port_middle: PortRole = Supply("forward")
    port_right: PortRole = Vent(1.0)
    source: SourceSpec = SourceSpec("pressure", 2.0e5)
    vents: VentSpec = VentSpec()

    def ports(self) -> dict[str, PortRole]:
        return {"left": self.port_left, "middle": self.port_middle,
                "right": self.port_right}

    def with_ports(self, roles: dict[str, PortRole]) -> "GripperAssembly":
        kw = {f"port_{name}": role for name, role in roles.items()}
        return replace(self, **kw)


@dataclass(frozen=True)
class QuadrupedAssembly:
    """Two limb pairs on one supply; each pair keeps its own three ports."""

    pair_front: GripperAssembly = GripperAssembly()
    pair_rear: GripperAssembly = GripperAssembly()

    def __post_init__(self):
        if self.pair_front.source != self.pair_rear.source:
            raise ConfigurationError("both pairs must share the same source setting")


@dataclass
class GripperNet:
    network: Network
    fragments: dict[str, ActuatorFragment]  # finger name -> fragment
    port_nodes: dict[str, str]
    supply_element: str | None
    vent_elements: dict[str, str]


def control_fan_in(assembly) -> int:
    """Number of independent control inputs of an assembly."""
    if isinstance(assembly, ActuatorRig):
        return 2
    if isinstance(assembly, GripperAssembly):
        return 3
    if isinstance(assembly, QuadrupedAssembly):
        return 6
    raise TypeError(f"not an assembly: {assembly!r}")


def _rename_node(elements, old, new):
    return [replace(el,
                    from_node=new if el.from_node == old else el.from_node,
                    to_node=new if el.to_node == old else el.to_node)
            for el in elements]


def _gripper_parts(assembly: GripperAssembly, fluid: Fluid, prefix: str,
                   reservoir: str, allow_no_supply: bool):
    roles = assembly.ports()
    supplies = [p for p, r in roles.items() if isinstance(r, Supply)]
    if len(supplies) > 1:
        raise ConfigurationError(f"{len(supplies)} supply ports requested, at most one allowed")
    if not supplies and not allow_no_supply:
        raise ConfigurationError("no supply port configured")

    port_nodes = {name: f"{prefix}P_{name}" for name in PORT_NAMES}
    frag_a = build_actuator_network(assembly.actuator_a, fluid,
                                    prefix=f"{prefix}a", reservoir=reservoir)
    frag_a = frag_a.alias_port(frag_a.port_left, port_nodes["left"])
    frag_a = frag_a.alias_port(frag_a.port_right, port_nodes["middle"])
    frag_b = build_actuator_network(assembly.actuator_b, fluid,
                                    prefix=f"{prefix}b", reservoir=reservoir)
    # finger B is mounted mirrored: outer chain on the right port
    frag_b = frag_b.alias_port(frag_b.port_left, port_nodes["right"])
    frag_b = frag_b.alias_port(frag_b.port_right, port_nodes["middle"])

    nodes = [Node(nid) for nid in port_nodes.values()]
    nodes += list(frag_a.nodes) + list(frag_b.nodes)
    elements = list(frag_a.elements) + list(frag_b.elements)

    supply_element = None
    vent_elements: dict[str, str] = {}
    aliases: list[tuple[str, str]] = []
    for name in PORT_NAMES:
        role = roles[name]
        node = port_nodes[name]
        if isinstance(role, Supply):
            sign = 1.0 if role.direction == "forward" else -1.0
            supply_element = f"{prefix}supply"
            elements.append(assembly.source.element(supply_element, reservoir, node, sign))
        elif isinstance(role, Vent):
            if assembly.vents.ideal:
                if role.opening > 0.0:
                    aliases.append((node, reservoir))
            else:
                eid = f"{prefix}vent_{name}"
                vent_elements[name] = eid
                elements.append(Element(eid, node, reservoir,
                                        assembly.vents.constriction(role.opening)))
        # Blocked: no element at all

    for old, new in aliases:
        elements = _rename_node(elements, old, new)
        nodes = [n for n in nodes if n.id != old]
        for name in PORT_NAMES:
            if port_nodes[name] == old:
                port_nodes[name] = new

    meta = GripperNet(network=None, fragments={"a": frag_a, "b": frag_b},
                      port_nodes=port_nodes, supply_element=supply_element,
                      vent_elements=vent_elements)
    return nodes, elements, meta


def build_gripper_network(assembly: GripperAssembly, fluid: Fluid, *,
                          reservoir_pressure: float = 0.0,
                          allow_no_supply: bool = False) -> GripperNet:
    nodes, elements, meta = _gripper_parts(assembly, fluid, "", "gnd", allow_no_supply)
    nodes = [Node("gnd", reservoir_pressure=reservoir_pressure)] + nodes
    meta.network = make_network(nodes, elements, fluid)
    return meta


@dataclass
class QuadrupedNet:
    network: Network
    pairs: dict[str, GripperNet]

    def fragments(self) -> dict[str, ActuatorFragment]:
        out = {}
        for pair_name, meta in self.pairs.items():
            for finger, frag in meta.fragments.items():
                out[f"{pair_name}_{finger}"] = frag
        return out


def build_quadruped_network(assembly: QuadrupedAssembly, fluid: Fluid, *,
                            reservoir_pressure: float = 0.0,
                            allow_no_supply: bool = False) -> QuadrupedNet:
    nodes = [Node("gnd", reservoir_pressure=reservoir_pressure)]
    elements = []
    pairs = {}
    for pair_name, pair in (("front", assembly.pair_front), ("rear", assembly.pair_rear)):
        n, e, meta = _gripper_parts(pair, fluid, f"{pair_name}_", "gnd", allow_no_supply)
        nodes += n
        elements += e
        pairs[pair_name] = meta
    net = make_network(nodes, elements, fluid)
    for meta in pairs.values():
        meta.network = net
    return QuadrupedNet(network=net, pairs=pairs)


# -- configuration enumeration ----------------------------------------------


def sign_of(kappa: float, dead_band: float = KAPPA_ZERO) -> str:
    if kappa > dead_band:
        return "+"
    if kappa < -dead_band:
        return "-"
    return "0"


@dataclass(frozen=True)
class ConfigurationResult:
    supply_port: str
    direction: str
    openings: dict[str, float]
    pattern: tuple[str, str] | None
    kappa: dict[str, float] | None
    error: str | None = None


@dataclass
class EnumerationResult:
    configurations: list[ConfigurationResult] = field(default_factory=list)

    def patterns(self) -> list[tuple[str, str]]:
        """Distinct reachable sign patterns in first-seen order."""
        seen = []
        for cfg in self.configurations:
            if cfg.pattern is not None and cfg.pattern not in seen:
                seen.append(cfg.pattern)
        return seen

    def find(self, pattern: tuple[str, str]) -> ConfigurationResult | None:
        for cfg in self.configurations:
            if cfg.pattern == pattern:
                return cfg
        return None


def enumerate_configurations(assembly: GripperAssembly, opening_grid,
                             fluid: Fluid, options: SolverOptions | None = None,
                             dead_band: float = KAPPA_ZERO) -> EnumerationResult:
    """Solve every single-supply role assignment over an opening grid.

    Ordering is deterministic: supply port (left, middle, right), then
    direction (forward, reverse), then vent openings of the remaining ports
    in port order with the grid in the order given.  Solve failures are
    recorded per configuration, not raised.
    """
    grid = [float(o) for o in opening_grid]
    if not grid:
        raise ValueError("opening grid must not be empty")
    if any(not 0.0 <= o <= 1.0 for o in grid):
        raise ValueError("openings must be in [0, 1]")

    result = EnumerationResult()
    for supply_port in PORT_NAMES:
        others = [p for p in PORT_NAMES if p != supply_port]
        for direction in ("forward", "reverse"):
            for o1 in grid:
                for o2 in grid:
                    roles = {supply_port: Supply(direction),
                             others[0]: Vent(o1), others[1]: Vent(o2)}
                    openings = {others[0]: o1, others[1]: o2}
                    cfg = assembly.with_ports(roles)
                    try:
                        gnet = build_gripper_network(cfg, fluid)
                        state = solve_steady(gnet.network, options)
                    except (OpenCircuitError, ConvergenceError) as exc:
                        result.configurations.append(ConfigurationResult(
                            supply_port, direction, openings, None, None,
                            error=f"{type(exc).__name__}: {exc}"))
                        continue
                    kappas = {name: actuator_state(state, frag).curvature
                              for name, frag in gnet.fragments.items()}
                    pattern = (sign_of(kappas["a"], dead_band),
                               sign_of(kappas["b"], dead_band))
                    result.configurations.append(ConfigurationResult(
                        supply_port, direction, openings, pattern, kappas))
    return result


def finger_states(state: SteadyState, gnet: GripperNet):
    return {name: actuator_state(state, frag) for name, frag in gnet.fragments.items()}


# -- canonical demonstration states ------------------------------------------

# Reconstructed demonstration set: seven parallel-mode states covering both
# curl directions, per-finger magnitude control and single-finger isolation,
# plus the two series-mode states.  The exact settings are illustrative, not
# measured data.
GRIPPER_DEMO_STATES: tuple[tuple[str, dict[str, PortRole]], ...] = (
    ("parallel_both_curl", {"left": Vent(1.0), "middle": Supply("forward"), "right": Vent(1.0)}),
    ("parallel_both_curl_reverse", {"left": Vent(1.0), "middle": Supply("reverse"), "right": Vent(1.0)}),
    ("parallel_left_soft", {"left": Vent(0.35), "middle": Supply("forward"), "right": Vent(1.0)}),
    ("parallel_right_soft", {"left": Vent(1.0), "middle": Supply("forward"), "right": Vent(0.35)}),
    ("parallel_left_only", {"left": Vent(1.0), "middle": Supply("forward"), "right": Vent(0.0)}),
    ("parallel_right_only", {"left": Vent(0.0), "middle": Supply("forward"), "right": Vent(1.0)}),
    ("parallel_hold", {"left": Vent(0.0), "middle": Supply("forward"), "right": Vent(0.0)}),
    ("series_from_left", {"left": Supply("forward"), "middle": Blocked(), "right": Vent(1.0)}),
    ("series_from_right", {"left": Vent(1.0), "middle": Blocked(), "right": Supply("forward")}),
)
