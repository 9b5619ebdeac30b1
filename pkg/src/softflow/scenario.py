"""Scenario files: a versioned, strict JSON format describing what to run.

Unknown keys are rejected everywhere (fail fast).  Pressures in scenario
files are written in bar (fields carry a _bar suffix) and converted to Pa on
load; every other quantity is SI.  Exactly one top-level subject is allowed
per scenario.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dc_fields

from .actuator import ActuatorModel, ActuatorRig, SourceSpec, VentSpec, build_rig_network
from .assembly import (
    Blocked,
    GripperAssembly,
    PortRole,
    QuadrupedAssembly,
    Supply,
    Vent,
    build_gripper_network,
    build_quadruped_network,
)
from .circuit import (
    Channel,
    ComplianceChamber,
    Constriction,
    Element,
    FlowSource,
    Node,
    PressureSource,
    SolverOptions,
    TeslaValve,
    make_network,
)
from .fluids import Fluid, default_fluid_library, fluid_from_config

BAR = 1.0e5  # Pa
SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    pass


def _check_keys(obj: dict, allowed, path: str):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ScenarioError(f"{path}: unknown keys {sorted(unknown)}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(f"{path}: missing required key {key!r}")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}: expected a number")
    return float(value)


# -- pieces -------------------------------------------------------------------


def parse_actuator_model(obj: dict, path: str) -> ActuatorModel:
    names = {f.name for f in dc_fields(ActuatorModel)}
    _check_keys(obj, names, path)
    kwargs = {}
    for key, value in obj.items():
        if key == "tip_sealed":
            if not isinstance(value, bool):
                raise ScenarioError(f"{path}.{key}: expected a boolean")
            kwargs[key] = value
        elif key == "segments_per_side":
            kwargs[key] = int(_number(value, f"{path}.{key}"))
        else:
            kwargs[key] = _number(value, f"{path}.{key}")
    try:
        return ActuatorModel(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def parse_source(obj: dict, path: str) -> SourceSpec:
    _check_keys(obj, {"kind", "value_bar", "value"}, path)
    kind = _require(obj, "kind", path)
    if kind == "pressure":
        value = _number(_require(obj, "value_bar", path), f"{path}.value_bar") * BAR
        if "value" in obj:
            raise ScenarioError(f"{path}: pressure sources take value_bar, not value")
    elif kind == "flow":
        value = _number(_require(obj, "value", path), f"{path}.value")
        if "value_bar" in obj:
            raise ScenarioError(f"{path}: flow sources take value (m3/s), not value_bar")
    else:
        raise ScenarioError(f"{path}.kind: must be 'pressure' or 'flow'")
    return SourceSpec(kind=kind, value=value)


def parse_vent(obj: dict, path: str) -> VentSpec:
    _check_keys(obj, {"reference_area", "discharge_coefficient", "opening", "ideal"}, path)
    kwargs = {}
    for key in ("reference_area", "discharge_coefficient", "opening"):
        if key in obj:
            kwargs[key] = _number(obj[key], f"{path}.{key}")
    if "ideal" in obj:
        if not isinstance(obj["ideal"], bool):
            raise ScenarioError(f"{path}.ideal: expected a boolean")
        kwargs["ideal"] = obj["ideal"]
    return VentSpec(**kwargs)


def parse_port_role(obj: dict, path: str) -> PortRole:
    _check_keys(obj, {"role", "direction", "opening"}, path)
    role = _require(obj, "role", path)
    if role == "supply":
        direction = obj.get("direction", "forward")
        if "opening" in obj:
            raise ScenarioError(f"{path}: supply ports have no opening")
        return Supply(direction)
    if role == "vent":
        if "direction" in obj:
            raise ScenarioError(f"{path}: vent ports have no direction")
        return Vent(_number(obj.get("opening", 1.0), f"{path}.opening"))
    if role == "blocked":
        if set(obj) != {"role"}:
            raise ScenarioError(f"{path}: blocked ports take no other keys")
        return Blocked()
    raise ScenarioError(f"{path}.role: must be 'supply', 'vent' or 'blocked'")


def parse_ports(obj: dict, path: str) -> dict[str, PortRole]:
    _check_keys(obj, {"left", "middle", "right"}, path)
    return {name: parse_port_role(_require(obj, name, path), f"{path}.{name}")
            for name in ("left", "middle", "right")}


def parse_law(obj: dict, path: str):
    kind = _require(obj, "type", path)
    if kind == "channel":
        _check_keys(obj, {"type", "length", "hydraulic_diameter"}, path)
        return Channel(length=_number(_require(obj, "length", path), f"{path}.length"),
                       hydraulic_diameter=_number(_require(obj, "hydraulic_diameter", path),
                                                  f"{path}.hydraulic_diameter"))
    if kind == "constriction":
        _check_keys(obj, {"type", "reference_area", "opening", "discharge_coefficient"}, path)
        kwargs = {"reference_area": _number(_require(obj, "reference_area", path),
                                            f"{path}.reference_area")}
        for key in ("opening", "discharge_coefficient"):
            if key in obj:
                kwargs[key] = _number(obj[key], f"{path}.{key}")
        return Constriction(**kwargs)
    if kind == "tesla_valve":
        _check_keys(obj, {"type", "base_resistance", "diodicity"}, path)
        return TeslaValve(base_resistance=_number(_require(obj, "base_resistance", path),
                                                  f"{path}.base_resistance"),
                          diodicity=_number(_require(obj, "diodicity", path),
                                            f"{path}.diodicity"))
    if kind == "flow_source":
        _check_keys(obj, {"type", "q_set"}, path)
        return FlowSource(q_set=_number(_require(obj, "q_set", path), f"{path}.q_set"))
    if kind == "pressure_source":
        _check_keys(obj, {"type", "p_set_bar"}, path)
        return PressureSource(p_set=_number(_require(obj, "p_set_bar", path),
                                            f"{path}.p_set_bar") * BAR)
    if kind == "compliance_chamber":
        _check_keys(obj, {"type", "rest_volume", "compliance"}, path)
        return ComplianceChamber(rest_volume=_number(_require(obj, "rest_volume", path),
                                                     f"{path}.rest_volume"),
                                 compliance=_number(_require(obj, "compliance", path),
                                                    f"{path}.compliance"))
    raise ScenarioError(f"{path}.type: unknown element law {kind!r}")


# -- subjects -----------------------------------------------------------------


@dataclass
class NetworkSubject:
    fluid_name: str
    nodes: list
    elements: list

    def build(self, fluids: dict[str, Fluid]):
        return make_network(self.nodes, self.elements, fluids[self.fluid_name])


@dataclass
class RigSubject:
    fluid_name: str
    rig: ActuatorRig

    def build(self, fluids: dict[str, Fluid]):
        return build_rig_network(self.rig, fluids[self.fluid_name])


@dataclass
class GripperSubject:
    fluid_name: str
    assembly: GripperAssembly

    def build(self, fluids: dict[str, Fluid], allow_no_supply: bool = False):
        return build_gripper_network(self.assembly, fluids[self.fluid_name],
                                     allow_no_supply=allow_no_supply)


@dataclass
class QuadrupedSubject:
    fluid_name: str
    assembly: QuadrupedAssembly

    def build(self, fluids: dict[str, Fluid], allow_no_supply: bool = False):
        return build_quadruped_network(self.assembly, fluids[self.fluid_name],
                                       allow_no_supply=allow_no_supply)


def _parse_gripper_body(obj: dict, path: str) -> GripperAssembly:
    kwargs = {}
    if "actuator_a" in obj:
        kwargs["actuator_a"] = parse_actuator_model(obj["actuator_a"], f"{path}.actuator_a")
    if "actuator_b" in obj:
        kwargs["actuator_b"] = parse_actuator_model(obj["actuator_b"], f"{path}.actuator_b")
    if "source" in obj:
        kwargs["source"] = parse_source(obj["source"], f"{path}.source")
    if "vents" in obj:
        kwargs["vents"] = parse_vent(obj["vents"], f"{path}.vents")
    assembly = GripperAssembly(**kwargs)
    if "ports" in obj:
        assembly = assembly.with_ports(parse_ports(obj["ports"], f"{path}.ports"))
    return assembly


def parse_subject(obj: dict, path: str = "subject"):
    kind = _require(obj, "type", path)
    fluid_name = _require(obj, "fluid", path)
    if kind == "network":
        _check_keys(obj, {"type", "fluid", "nodes", "elements"}, path)
        nodes = []
        for i, nobj in enumerate(_require(obj, "nodes", path)):
            npath = f"{path}.nodes[{i}]"
            _check_keys(nobj, {"id", "reservoir_pressure_bar"}, npath)
            nid = _require(nobj, "id", npath)
            if "reservoir_pressure_bar" in nobj:
                nodes.append(Node(nid, reservoir_pressure=_number(
                    nobj["reservoir_pressure_bar"], f"{npath}.reservoir_pressure_bar") * BAR))
            else:
                nodes.append(Node(nid))
        elements = []
        for i, eobj in enumerate(_require(obj, "elements", path)):
            epath = f"{path}.elements[{i}]"
            _check_keys(eobj, {"id", "from", "to", "law"}, epath)
            elements.append(Element(_require(eobj, "id", epath),
                                    _require(eobj, "from", epath),
                                    _require(eobj, "to", epath),
                                    parse_law(_require(eobj, "law", epath), f"{epath}.law")))
        return NetworkSubject(fluid_name, nodes, elements)
    if kind == "actuator_rig":
        _check_keys(obj, {"type", "fluid", "actuator", "source", "direction", "vent"}, path)
        model = parse_actuator_model(obj.get("actuator", {}), f"{path}.actuator")
        source = parse_source(_require(obj, "source", path), f"{path}.source")
        direction = obj.get("direction", "forward")
        vent = parse_vent(obj.get("vent", {}), f"{path}.vent")
        try:
            rig = ActuatorRig(model=model, source=source, direction=direction, vent=vent)
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
        return RigSubject(fluid_name, rig)
    if kind == "gripper":
        _check_keys(obj, {"type", "fluid", "actuator_a", "actuator_b", "source",
                          "vents", "ports"}, path)
        return GripperSubject(fluid_name, _parse_gripper_body(obj, path))
    if kind == "quadruped":
        _check_keys(obj, {"type", "fluid", "pairs"}, path)
        pairs = _require(obj, "pairs", path)
        _check_keys(pairs, {"front", "rear"}, f"{path}.pairs")
        front = _parse_gripper_body(_require(pairs, "front", f"{path}.pairs"),
                                    f"{path}.pairs.front")
        rear = _parse_gripper_body(_require(pairs, "rear", f"{path}.pairs"),
                                   f"{path}.pairs.rear")
        try:
            return QuadrupedSubject(fluid_name, QuadrupedAssembly(front, rear))
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    raise ScenarioError(f"{path}.type: unknown subject type {kind!r}")


# -- blocks -------------------------------------------------------------------


@dataclass
class SweepConfig:
    p_min_bar: float = 1.25
    p_max_bar: float = 2.5
    step_bar: float = 0.25
    directions: tuple = ("forward", "reverse")
    fluids: tuple = ("air_20c", "water_20c")
    repeats: int = 1
    fps: float = 240.0
    kappa_rel_sigma: float = 0.0  # optional synthetic measurement noise

    def pressures_bar(self) -> list[float]:
        if self.p_min_bar >= self.p_max_bar:
            raise ScenarioError("sweep: p_min_bar must be below p_max_bar")
        if self.step_bar <= 0.0:
            raise ScenarioError("sweep: step_bar must be positive")
        count = int(round((self.p_max_bar - self.p_min_bar) / self.step_bar)) + 1
        return [self.p_min_bar + i * self.step_bar for i in range(count)
                if self.p_min_bar + i * self.step_bar <= self.p_max_bar + 1e-12]


def parse_sweep(obj: dict, path: str = "sweep") -> SweepConfig:
    _check_keys(obj, {"p_min_bar", "p_max_bar", "step_bar", "directions", "fluids",
                      "repeats", "fps", "noise"}, path)
    cfg = SweepConfig()
    kwargs = {}
    for key in ("p_min_bar", "p_max_bar", "step_bar", "fps"):
        if key in obj:
            kwargs[key] = _number(obj[key], f"{path}.{key}")
    if "repeats" in obj:
        kwargs["repeats"] = int(_number(obj["repeats"], f"{path}.repeats"))
    if "directions" in obj:
        dirs = obj["directions"]
        if dirs == "both":
            kwargs["directions"] = ("forward", "reverse")
        elif dirs in ("forward", "reverse"):
            kwargs["directions"] = (dirs,)
        else:
            raise ScenarioError(f"{path}.directions: 'both', 'forward' or 'reverse'")
    if "fluids" in obj:
        kwargs["fluids"] = tuple(obj["fluids"])
    if "noise" in obj:
        _check_keys(obj["noise"], {"kappa_rel_sigma"}, f"{path}.noise")
        kwargs["kappa_rel_sigma"] = _number(obj["noise"].get("kappa_rel_sigma", 0.0),
                                            f"{path}.noise.kappa_rel_sigma")
    cfg = SweepConfig(**kwargs)
    cfg.pressures_bar()  # validate now
    return cfg


@dataclass
class SimulateConfig:
    t_end: float
    dt: float
    schedule: list  # list of (t, {element_id: value})


def parse_simulate(obj: dict, path: str = "simulate") -> SimulateConfig:
    _check_keys(obj, {"t_end", "dt", "schedule"}, path)
    entries = []
    for i, item in enumerate(obj.get("schedule", [])):
        ipath = f"{path}.schedule[{i}]"
        _check_keys(item, {"t", "set"}, ipath)
        settings = _require(item, "set", ipath)
        if not isinstance(settings, dict):
            raise ScenarioError(f"{ipath}.set: expected an object")
        entries.append((_number(_require(item, "t", ipath), f"{ipath}.t"),
                        {k: _number(v, f"{ipath}.set.{k}") for k, v in settings.items()}))
    return SimulateConfig(t_end=_number(_require(obj, "t_end", path), f"{path}.t_end"),
                          dt=_number(_require(obj, "dt", path), f"{path}.dt"),
                          schedule=entries)


@dataclass
class DemoConfig:
    preset: str = "gripper_states"
    hold_s: float = 2.0
    dt: float = 0.02
    period_s: float = 2.0
    cycles: int = 3


def parse_demo(obj: dict, path: str = "demo") -> DemoConfig:
    _check_keys(obj, {"preset", "hold_s", "dt", "period_s", "cycles"}, path)
    kwargs = {}
    if "preset" in obj:
        kwargs["preset"] = obj["preset"]
    for key in ("hold_s", "dt", "period_s"):
        if key in obj:
            kwargs[key] = _number(obj[key], f"{path}.{key}")
    if "cycles" in obj:
        kwargs["cycles"] = int(_number(obj["cycles"], f"{path}.cycles"))
    return DemoConfig(**kwargs)


@dataclass
class EnumerateConfig:
    grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)


def parse_enumerate(obj: dict, path: str = "enumerate") -> EnumerateConfig:
    _check_keys(obj, {"grid"}, path)
    if "grid" in obj:
        return EnumerateConfig(grid=tuple(_number(v, f"{path}.grid[{i}]")
                                          for i, v in enumerate(obj["grid"])))
    return EnumerateConfig()


@dataclass
class TeleopConfig:
    tick_rate: float = 50.0
    speed: float = 1.0  # simulated seconds per wall second; 0 = free-running


def parse_teleop(obj: dict, path: str = "teleop") -> TeleopConfig:
    _check_keys(obj, {"tick_rate", "speed"}, path)
    kwargs = {k: _number(obj[k], f"{path}.{k}") for k in ("tick_rate", "speed") if k in obj}
    return TeleopConfig(**kwargs)


@dataclass
class MocapConfig:
    smoothing_window: int = 20
    rate_threshold: float = 0.05
    window_s: float = 0.4
    start_fraction: float = 0.02


def parse_mocap(obj: dict, path: str = "mocap") -> MocapConfig:
    _check_keys(obj, {"smoothing_window", "rate_threshold", "window_s", "start_fraction"}, path)
    kwargs = {}
    if "smoothing_window" in obj:
        kwargs["smoothing_window"] = int(_number(obj["smoothing_window"],
                                                 f"{path}.smoothing_window"))
    for key in ("rate_threshold", "window_s", "start_fraction"):
        if key in obj:
            kwargs[key] = _number(obj[key], f"{path}.{key}")
    return MocapConfig(**kwargs)


# -- top level ----------------------------------------------------------------


@dataclass
class Scenario:
    fluids: dict[str, Fluid]
    solver: SolverOptions
    subject: object | None = None
    sweep: SweepConfig | None = None
    simulate: SimulateConfig | None = None
    demo: DemoConfig | None = None
    enumerate: EnumerateConfig | None = None
    teleop: TeleopConfig = field(default_factory=TeleopConfig)
    mocap: MocapConfig = field(default_factory=MocapConfig)

    def fluid(self, name: str) -> Fluid:
        try:
            return self.fluids[name]
        except KeyError:
            raise ScenarioError(f"unknown fluid {name!r}") from None


_SOLVER_KEYS = {"tol_kcl", "tol_law", "tol_energy", "max_iter", "epsilon_open",
                "q_smooth", "atmospheric_pressure", "include_inertance"}


def parse_scenario(doc: dict) -> Scenario:
    _check_keys(doc, {"schema", "fluids", "solver", "subject", "sweep", "simulate",
                      "demo", "enumerate", "teleop", "mocap"}, "scenario")
    schema = _require(doc, "schema", "scenario")
    if schema != SCHEMA_VERSION:
        raise ScenarioError(f"scenario.schema: expected {SCHEMA_VERSION}, got {schema!r}")

    fluids = default_fluid_library()
    for name, spec in doc.get("fluids", {}).items():
        try:
            fluids[name] = fluid_from_config(name, spec)
        except ValueError as exc:
            raise ScenarioError(f"fluids.{name}: {exc}") from None

    solver = SolverOptions()
    if "solver" in doc:
        _check_keys(doc["solver"], _SOLVER_KEYS, "solver")
        kwargs = {}
        for key, value in doc["solver"].items():
            if key == "include_inertance":
                if not isinstance(value, bool):
                    raise ScenarioError("solver.include_inertance: expected a boolean")
                kwargs[key] = value
            elif key == "max_iter":
                kwargs[key] = int(_number(value, f"solver.{key}"))
            else:
                kwargs[key] = _number(value, f"solver.{key}")
        solver = SolverOptions(**kwargs)

    scenario = Scenario(fluids=fluids, solver=solver)
    if "subject" in doc:
        scenario.subject = parse_subject(doc["subject"])
        if scenario.subject.fluid_name not in fluids:
            raise ScenarioError(f"subject.fluid: unknown fluid {scenario.subject.fluid_name!r}")
    if "sweep" in doc:
        scenario.sweep = parse_sweep(doc["sweep"])
    if "simulate" in doc:
        scenario.simulate = parse_simulate(doc["simulate"])
    if "demo" in doc:
        scenario.demo = parse_demo(doc["demo"])
    if "enumerate" in doc:
        scenario.enumerate = parse_enumerate(doc["enumerate"])
    if "teleop" in doc:
        scenario.teleop = parse_teleop(doc["teleop"])
    if "mocap" in doc:
        scenario.mocap = parse_mocap(doc["mocap"])
    return scenario


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON: {exc}") from None
    return parse_scenario(doc)
