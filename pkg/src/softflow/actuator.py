"""Bidirectional bellows actuator as a circuit fragment.

The actuator is two chains of channel segments joined by a narrow tip bore
that concentrates the viscous loss.  Pushing flow through the loop makes the
upstream chamber chain sit near supply pressure and the downstream chain
near vent pressure; the mean chamber pressure difference maps linearly to
bending curvature.  Reversing the flow mirrors the pressure asymmetry and
the bend direction.

Each inter-segment node carries a compliance chamber (bellows elasticity),
and a short "parasitic" channel at each port represents flow-path losses
outside the chamber region, sized to take a configurable fraction of the
loop loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .circuit import (
    Channel,
    ComplianceChamber,
    Constriction,
    Element,
    FlowSource,
    Node,
    PressureSource,
    SteadyState,
    TeslaValve,
    make_network,
)
from .fluids import Fluid


@dataclass(frozen=True)
class ActuatorModel:
    segments_per_side: int = 3
    segment_length: float = 0.02  # m
    segment_diameter: float = 5.0e-3  # m
    tip_length: float = 0.01  # m
    tip_diameter: float = 6.0e-4  # m, the narrow bore
    curvature_gain: float = 2.0e-4  # (1/m)/Pa
    asymmetry: float = 0.0  # signed; +e scales left-to-right tip resistance by 1+e
    parasitic_fraction: float = 0.08  # share of loop loss outside the chambers
    parasitic_length: float = 0.05  # m
    creep_amplitude: float = 0.05  # slow flattening on top of the fill response
    creep_tau: float = 2.0  # s
    chamber_compliance: float = 5.0e-11  # m3/Pa
    chamber_rest_volume: float = 5.0e-6  # m3
    tip_sealed: bool = False  # sealed tip turns the loop into two dead ends

    def __post_init__(self):
        if self.segments_per_side < 1:
            raise ValueError("segments_per_side must be at least 1")
        for name in ("segment_length", "segment_diameter", "tip_length",
                     "tip_diameter", "parasitic_length", "creep_tau",
                     "chamber_compliance", "chamber_rest_volume"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.tip_diameter >= self.segment_diameter:
            raise ValueError("tip bore must be narrower than the segment channels")
        if self.curvature_gain <= 0.0:
            raise ValueError("curvature_gain must be positive")
        if not abs(self.asymmetry) < 0.5:
            raise ValueError("asymmetry magnitude must be below 0.5")
        if not 0.0 <= self.parasitic_fraction < 1.0:
            raise ValueError("parasitic_fraction must be in [0, 1)")
        if self.creep_amplitude < 0.0:
            raise ValueError("creep_amplitude must be non-negative")

    def chain_resistance_per_viscosity(self) -> float:
        """Sum of 128 L / (pi d^4) over the port-to-port chain, tip included."""
        seg = 128.0 * self.segment_length / (math.pi * self.segment_diameter**4)
        tip = 128.0 * self.tip_length / (math.pi * self.tip_diameter**4)
        return 2 * self.segments_per_side * seg + tip


@dataclass(frozen=True)
class ActuatorState:
    delta_p_chambers: float  # Pa, mean left chamber minus mean right chamber
    curvature: float  # 1/m, signed
    flow_through: float  # m3/s, signed positive left-to-right


@dataclass(frozen=True)
class ActuatorFragment:
    """Nodes and elements of one actuator, ready to splice into a network."""

    model: ActuatorModel
    prefix: str
    nodes: tuple
    elements: tuple
    port_left: str
    port_right: str
    left_chambers: tuple
    right_chambers: tuple
    chamber_elements: tuple
    tip_element: str | None
    loop_probe: str  # element whose flow is the signed left-to-right loop flow
    reservoir: str

    def alias_port(self, port_id: str, new_id: str) -> "ActuatorFragment":
        """Merge a port node onto an existing node (shared port or reservoir)."""
        if port_id not in (self.port_left, self.port_right):
            raise ValueError(f"{port_id!r} is not a port of this fragment")
        nodes = tuple(n for n in self.nodes if n.id != port_id)
        elements = tuple(
            replace(el,
                    from_node=new_id if el.from_node == port_id else el.from_node,
                    to_node=new_id if el.to_node == port_id else el.to_node)
            for el in self.elements)
        return replace(self, nodes=nodes, elements=elements,
                       port_left=new_id if self.port_left == port_id else self.port_left,
                       port_right=new_id if self.port_right == port_id else self.port_right)


def build_actuator_network(model: ActuatorModel, fluid: Fluid | None = None,
                           prefix: str = "act", reservoir: str = "gnd") -> ActuatorFragment:
    """Build the two-port circuit fragment of one actuator.

    The tip is a plain channel for a symmetric model; a nonzero asymmetry
    needs the fluid viscosity to realise direction-dependent tip resistance,
    so `fluid` becomes mandatory in that case.  Chambers reference the given
    reservoir node id, which the caller's network must provide.
    """
    m = model
    s = m.segments_per_side
    pl, pr = f"{prefix}.pl", f"{prefix}.pr"
    left = [f"{prefix}.l{i}" for i in range(1, s + 1)]  # l1 near port, l_s at tip
    right = [f"{prefix}.r{i}" for i in range(1, s + 1)]
    nodes = [Node(pl)] + [Node(n) for n in left] + [Node(n) for n in right] + [Node(pr)]

    elements: list[Element] = []
    seg = Channel(length=m.segment_length, hydraulic_diameter=m.segment_diameter)

    if m.parasitic_fraction > 0.0:
        jl, jr = f"{prefix}.jl", f"{prefix}.jr"
        nodes.insert(1, Node(jl))
        nodes.append(Node(jr))
        r_chain = m.chain_resistance_per_viscosity()
        r_par = m.parasitic_fraction * r_chain / (2.0 * (1.0 - m.parasitic_fraction))
        d_par = (128.0 * m.parasitic_length / (math.pi * r_par)) ** 0.25
        par = Channel(length=m.parasitic_length, hydraulic_diameter=d_par)
        elements.append(Element(f"{prefix}.par_l", pl, jl, par))
        left_entry = jl
        right_exit = jr
    else:
        left_entry = pl
        right_exit = pr

    chain_l = [left_entry] + left
    for i in range(s):
        elements.append(Element(f"{prefix}.seg_l{i + 1}", chain_l[i], chain_l[i + 1], seg))

    tip_id = None
    if not m.tip_sealed:
        tip_id = f"{prefix}.tip"
        if m.asymmetry == 0.0:
            tip_law = Channel(length=m.tip_length, hydraulic_diameter=m.tip_diameter)
            elements.append(Element(tip_id, left[-1], right[-1], tip_law))
        else:
            if fluid is None:
                raise ValueError("an asymmetric tip needs the working fluid at build time")
            r_tip = 128.0 * fluid.dynamic_viscosity * m.tip_length / (math.pi * m.tip_diameter**4)
            e = m.asymmetry
            if e > 0.0:
                # left-to-right is the high-resistance direction
                law = TeslaValve(base_resistance=r_tip * (1.0 - e),
                                 diodicity=(1.0 + e) / (1.0 - e))
                elements.append(Element(tip_id, right[-1], left[-1], law))
            else:
                law = TeslaValve(base_resistance=r_tip * (1.0 + e),
                                 diodicity=(1.0 - e) / (1.0 + e))
                elements.append(Element(tip_id, left[-1], right[-1], law))

    chain_r = right[::-1] + [right_exit]  # r_s down to r_1, then out
    for i in range(s):
        elements.append(Element(f"{prefix}.seg_r{s - i}", chain_r[i], chain_r[i + 1], seg))

    if m.parasitic_fraction > 0.0:
        par = elements[0].law
        elements.append(Element(f"{prefix}.par_r", right_exit, pr, par))

    chamber = ComplianceChamber(rest_volume=m.chamber_rest_volume,
                                compliance=m.chamber_compliance)
    chamber_ids = []
    for nid in left + right:
        cid = f"{prefix}.cham_{nid.rsplit('.', 1)[1]}"
        chamber_ids.append(cid)
        elements.append(Element(cid, nid, reservoir, chamber))

    return ActuatorFragment(
        model=m, prefix=prefix, nodes=tuple(nodes), elements=tuple(elements),
        port_left=pl, port_right=pr,
        left_chambers=tuple(left), right_chambers=tuple(right),
        chamber_elements=tuple(chamber_ids), tip_element=tip_id,
        loop_probe=f"{prefix}.seg_l1", reservoir=reservoir,
    )


def static_variant(model: ActuatorModel) -> ActuatorModel:
    """Same geometry with the tip sealed: no recirculation between chambers."""
    return replace(model, tip_sealed=True)


def chamber_pressure_difference(state: SteadyState, fragment: ActuatorFragment) -> float:
    """Mean left-chamber pressure minus mean right-chamber pressure, in Pa."""
    try:
        left = [state.node_pressures[n] for n in fragment.left_chambers]
        right = [state.node_pressures[n] for n in fragment.right_chambers]
    except KeyError as exc:
        raise LookupError(f"state does not contain actuator node {exc.args[0]!r}") from None
    return sum(left) / len(left) - sum(right) / len(right)


def quasi_static_curvature(delta_p: float, model: ActuatorModel) -> float:
    """Signed curvature (1/m) from the chamber pressure difference."""
    return model.curvature_gain * delta_p


def actuator_state(state: SteadyState, fragment: ActuatorFragment) -> ActuatorState:
    dp = chamber_pressure_difference(state, fragment)
    return ActuatorState(
        delta_p_chambers=dp,
        curvature=quasi_static_curvature(dp, fragment.model),
        flow_through=state.element_flows.get(fragment.loop_probe, 0.0),
    )


# -- test rig for a single actuator -----------------------------------------


@dataclass(frozen=True)
class SourceSpec:
    kind: str  # "pressure" (regulator, Pa gauge) or "flow" (PD pump, m3/s)
    value: float

    def __post_init__(self):
        if self.kind not in ("pressure", "flow"):
            raise ValueError("source kind must be 'pressure' or 'flow'")

    def element(self, eid: str, reservoir: str, port: str, sign: float = 1.0) -> Element:
        if self.kind == "pressure":
            return Element(eid, reservoir, port, PressureSource(p_set=sign * self.value))
        return Element(eid, reservoir, port, FlowSource(q_set=sign * self.value))


@dataclass(frozen=True)
class VentSpec:
    """Outlet constriction; `ideal` short-circuits the port to the reservoir."""

    reference_area: float = 1.257e-5  # m2, 4 mm bore
    discharge_coefficient: float = 0.62
    opening: float = 1.0
    ideal: bool = False

    def constriction(self, opening: float | None = None) -> Constriction:
        return Constriction(reference_area=self.reference_area,
                            opening=self.opening if opening is None else opening,
                            discharge_coefficient=self.discharge_coefficient)


@dataclass(frozen=True)
class ActuatorRig:
    """Single-actuator bench: supply on one port, vent on the other."""

    model: ActuatorModel
    source: SourceSpec
    direction: str = "forward"  # forward feeds the left port
    vent: VentSpec = VentSpec()

    def __post_init__(self):
        if self.direction not in ("forward", "reverse"):
            raise ValueError("direction must be 'forward' or 'reverse'")


def build_rig_network(rig: ActuatorRig, fluid: Fluid,
                      reservoir_pressure: float = 0.0):
    """Realise a rig as a solvable Network.

    Returns (network, fragment, ids) where ids maps 'supply' and 'vent' to
    element ids ('vent' is absent for an ideal vent).
    """
    frag = build_actuator_network(rig.model, fluid, prefix="act", reservoir="gnd")
    supply_port = frag.port_left if rig.direction == "forward" else frag.port_right
    vent_port = frag.port_right if rig.direction == "forward" else frag.port_left

    ids = {"supply": "supply"}
    elements = [rig.source.element("supply", "gnd", supply_port)]
    if rig.vent.ideal:
        frag = frag.alias_port(vent_port, "gnd")
    else:
        elements.append(Element("vent", vent_port, "gnd", rig.vent.constriction()))
        ids["vent"] = "vent"
    elements.extend(frag.elements)
    nodes = [Node("gnd", reservoir_pressure=reservoir_pressure)] + list(frag.nodes)
    return make_network(nodes, elements, fluid), frag, ids


# -- response dynamics -------------------------------------------------------


def fill_volume(model: ActuatorModel, delta_p: float) -> float:
    """Extra volume the supply must deliver to inflate one chamber chain.

    The chambers on the high side each stretch by about C * dp/2 relative to
    the loop mean, so the transported volume is s * C * |dp| / 2.
    """
    return model.segments_per_side * model.chamber_compliance * abs(delta_p) / 2.0


def fill_time_constant(model: ActuatorModel, loop_flow: float, final_curvature: float) -> float:
    if loop_flow <= 0.0:
        raise ValueError("loop flow must be positive")
    delta_p = final_curvature / model.curvature_gain
    return fill_volume(model, delta_p) / loop_flow


def response_value(model: ActuatorModel, t: float, tau_fill: float,
                   final_curvature: float) -> float:
    """Two-stage step response: first-order fill times a slow creep factor.

    kappa(t) = k_inf (1 - e^(-t/tau_fill)) (1 + a (1 - e^(-t/tau_c))) / (1 + a)
    which settles to exactly final_curvature.
    """
    a = model.creep_amplitude
    fill = 1.0 - math.exp(-t / tau_fill) if tau_fill > 0.0 else 1.0
    creep = (1.0 + a * (1.0 - math.exp(-t / model.creep_tau))) / (1.0 + a)
    return final_curvature * fill * creep


def response_curve(model: ActuatorModel, solved_loop_flow: float,
                   final_curvature: float, fps: float, duration: float):
    """Sampled curvature step response; returns (times s, curvature 1/m)."""
    if solved_loop_flow <= 0.0:
        raise ValueError("loop flow must be positive")
    if fps <= 0.0 or duration <= 0.0:
        raise ValueError("fps and duration must be positive")
    tau_fill = fill_time_constant(model, solved_loop_flow, final_curvature)
    n = int(round(duration * fps)) + 1
    times = np.arange(n) / fps
    kappa = np.array([response_value(model, t, tau_fill, final_curvature) for t in times])
    return times, kappa


def settle_duration(model: ActuatorModel, tau_fill: float) -> float:
    """A duration that comfortably covers fill and creep settling."""
    return 8.0 * max(tau_fill, model.creep_tau) + 1.0


def measured_response_time(model: ActuatorModel, fluid: Fluid, pressure: float,
                           fps: float = 240.0, options=None) -> dict:
    """Solve an ideal-vent rig and reduce its step response like the capture
    pipeline would: arc-level settle rule on the sampled curvature curve."""
    from .circuit import solve_steady
    from .mocap import CurvatureSeries, extract_response

    rig = ActuatorRig(model=model, source=SourceSpec("pressure", pressure),
                      vent=VentSpec(ideal=True))
    net, frag, _ = build_rig_network(rig, fluid)
    state = solve_steady(net, options)
    act = actuator_state(state, frag)
    flow = abs(act.flow_through)
    kappa = abs(act.curvature)
    tau = fill_time_constant(model, flow, kappa)
    _, kap = response_curve(model, flow, kappa, fps, settle_duration(model, tau))
    series = CurvatureSeries.from_values(kap / 1000.0, fps)  # mocap works in 1/mm
    summary = extract_response(series)
    return {"response_time": summary.response_time, "tau_fill": tau,
            "loop_flow": flow, "curvature": kappa}


def calibrate_response_ratio(model: ActuatorModel, air: Fluid, water: Fluid,
                             pressure: float = 2.0e5, target: float = 1.37,
                             fps: float = 240.0, scale_lo: float = 1e-3,
                             scale_hi: float = 4.0, iters: int = 40,
                             options=None) -> dict:
    """Tune the chamber compliance so water settles `target` times slower.

    The measured response time is creep-dominated when filling is fast and
    fill-dominated when it is slow; scaling the compliance moves both fluids
    along that curve while the viscosity ratio keeps water behind air, so
    the water/air response-time ratio grows monotonically with the scale.
    Bisection on the scale factor lands the ratio on the target (up to the
    frame-period quantisation of the settle rule).
    """

    def ratio_at(scale):
        m = replace(model, chamber_compliance=model.chamber_compliance * scale)
        rw = measured_response_time(m, water, pressure, fps, options)
        ra = measured_response_time(m, air, pressure, fps, options)
        return rw["response_time"] / ra["response_time"], ra, rw

    lo, hi = scale_lo, scale_hi
    r_lo, _, _ = ratio_at(lo)
    r_hi, _, _ = ratio_at(hi)
    grow = 0
    while r_hi < target and grow < 8:
        hi *= 4.0
        r_hi, _, _ = ratio_at(hi)
        grow += 1
    if not (r_lo <= target <= r_hi):
        scale = lo if abs(r_lo - target) < abs(r_hi - target) else hi
    else:
        for _ in range(iters):
            mid = math.sqrt(lo * hi)
            r_mid, _, _ = ratio_at(mid)
            if r_mid < target:
                lo = mid
            else:
                hi = mid
        scale = math.sqrt(lo * hi)
    ratio, ra, rw = ratio_at(scale)
    return {
        "compliance_scale": scale,
        "chamber_compliance": model.chamber_compliance * scale,
        "ratio": ratio,
        "target": target,
        "air": ra,
        "water": rw,
    }
