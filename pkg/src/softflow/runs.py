"""Scenario execution: everything the CLI subcommands do, minus arg parsing.

All emitted CSV and JSON is deterministic for a given scenario file and
seed: floats are written with repr (shortest round-trip form), rows follow
fixed loop orders, and JSON keys are sorted.
"""

from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .actuator import (
    SourceSpec,
    actuator_state,
    build_rig_network,
    fill_time_constant,
    response_curve,
    settle_duration,
)
from .assembly import (
    GRIPPER_DEMO_STATES,
    QuadrupedAssembly,
    Supply,
    Vent,
    enumerate_configurations,
)
from .circuit import (
    ControlSchedule,
    ConvergenceError,
    OpenCircuitError,
    TransientStepper,
    audit_balanced,
    power_audit,
    simulate_transient,
    solve_steady,
)
from .mocap import (
    CurvatureSeries,
    curvature_series_from_frames,
    extract_response,
    read_marker_csv,
    smooth,
)
from .scenario import (
    GripperSubject,
    NetworkSubject,
    QuadrupedSubject,
    RigSubject,
    Scenario,
    ScenarioError,
    SweepConfig,
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _subject_network(scenario: Scenario):
    """Build the scenario subject; returns (network, fragments_by_limb)."""
    subject = scenario.subject
    if subject is None:
        raise ScenarioError("scenario has no subject")
    if isinstance(subject, NetworkSubject):
        return subject.build(scenario.fluids), {}
    if isinstance(subject, RigSubject):
        net, frag, _ids = subject.build(scenario.fluids)
        return net, {"act": frag}
    if isinstance(subject, GripperSubject):
        gnet = subject.build(scenario.fluids)
        return gnet.network, dict(gnet.fragments)
    if isinstance(subject, QuadrupedSubject):
        qnet = subject.build(scenario.fluids)
        return qnet.network, qnet.fragments()
    raise ScenarioError(f"unsupported subject {type(subject).__name__}")


# -- solve ---------------------------------------------------------------------


def run_solve(scenario: Scenario, out_dir) -> dict:
    net, frags = _subject_network(scenario)
    state = solve_steady(net, scenario.solver)
    audit = power_audit(state, net)

    out = Path(out_dir)
    write_csv(out / "node_pressures.csv", ["node", "pressure_pa"],
              [[nid, state.node_pressures[nid]] for nid in sorted(state.node_pressures)])
    from .circuit import element_drops

    drops = element_drops(state, net)
    write_csv(out / "element_flows.csv", ["element", "flow_m3s", "pressure_drop_pa"],
              [[eid, state.element_flows[eid], drops[eid]]
               for eid in sorted(state.element_flows)])

    summary = {
        "kcl_residual_m3s": state.kcl_residual,
        "law_residual_pa": state.residual_norm,
        "iterations": state.iterations,
        "power": audit,
        "power_balanced": audit_balanced(audit, scenario.solver.tol_energy),
        "limbs": {},
    }
    for name, frag in sorted(frags.items()):
        a = actuator_state(state, frag)
        summary["limbs"][name] = {
            "delta_p_chambers_pa": a.delta_p_chambers,
            "curvature_per_m": a.curvature,
            "loop_flow_m3s": a.flow_through,
        }
    write_json(out / "solve_summary.json", summary)
    return summary


# -- simulate -------------------------------------------------------------------


def run_simulate(scenario: Scenario, out_dir) -> dict:
    cfg = scenario.simulate
    if cfg is None:
        raise ScenarioError("scenario has no simulate block")
    net, frags = _subject_network(scenario)
    schedule = ControlSchedule(tuple((t, dict(s)) for t, s in cfg.schedule))
    trace = simulate_transient(net, schedule, cfg.t_end, cfg.dt, scenario.solver)

    node_ids = sorted(trace.states[0].node_pressures)
    elem_ids = sorted(trace.states[0].element_flows)
    chamber_ids = sorted(trace.chamber_volumes)
    limb_names = sorted(frags)
    header = (["t_s"] + [f"p_{n}" for n in node_ids] + [f"q_{e}" for e in elem_ids]
              + [f"v_{c}" for c in chamber_ids] + [f"kappa_{name}" for name in limb_names])
    rows = []
    for i, t in enumerate(trace.times):
        st = trace.states[i]
        row = [float(t)]
        row += [st.node_pressures[n] for n in node_ids]
        row += [st.element_flows[e] for e in elem_ids]
        row += [float(trace.chamber_volumes[c][i]) for c in chamber_ids]
        row += [actuator_state(st, frags[name]).curvature for name in limb_names]
        rows.append(row)
    write_csv(Path(out_dir) / "trace.csv", header, rows)
    return {"steps": len(trace.times) - 1, "t_end": float(trace.times[-1])}


# -- sweep ----------------------------------------------------------------------


SWEEP_HEADER = ["repeat", "fluid", "direction", "pressure_bar", "source_pressure_pa",
                "delta_p_chambers_pa", "curvature_per_m", "curvature_measured_per_m",
                "loop_flow_m3s", "tau_fill_s", "response_time_s", "error"]


def sweep_rows(scenario: Scenario, seed: int = 0):
    subject = scenario.subject
    if not isinstance(subject, RigSubject):
        raise ScenarioError("sweep needs an actuator_rig subject")
    if subject.rig.source.kind != "pressure":
        raise ScenarioError("sweep varies supply pressure; use a pressure source")
    cfg = scenario.sweep or SweepConfig()
    model = subject.rig.model
    rng = np.random.default_rng(seed)

    rows = []
    for repeat in range(cfg.repeats):
        for fluid_name in cfg.fluids:
            fluid = scenario.fluid(fluid_name)
            for direction in cfg.directions:
                for p_bar in cfg.pressures_bar():
                    p_pa = p_bar * 1e5
                    rig = replace(subject.rig, direction=direction,
                                  source=SourceSpec("pressure", p_pa))
                    try:
                        net, frag, _ = build_rig_network(rig, fluid)
                        state = solve_steady(net, scenario.solver)
                    except (OpenCircuitError, ConvergenceError) as exc:
                        rows.append([repeat, fluid_name, direction, p_bar, p_pa,
                                     None, None, None, None, None, None,
                                     f"{type(exc).__name__}: {exc}"])
                        continue
                    act = actuator_state(state, frag)
                    flow = abs(act.flow_through)
                    kappa = act.curvature
                    noise = rng.standard_normal()
                    measured = kappa * (1.0 + cfg.kappa_rel_sigma * noise)
                    tau = response_time = None
                    if flow > 0.0:
                        tau = fill_time_constant(model, flow, kappa)
                        duration = settle_duration(model, tau)
                        times, kap = response_curve(model, flow, abs(kappa), cfg.fps, duration)
                        series = CurvatureSeries.from_values(kap / 1000.0, cfg.fps)
                        response_time = extract_response(series).response_time
                    rows.append([repeat, fluid_name, direction, p_bar, p_pa,
                                 act.delta_p_chambers, kappa, measured,
                                 act.flow_through, tau, response_time, None])
    return rows


def run_sweep(scenario: Scenario, out_dir, seed: int = 0) -> dict:
    rows = sweep_rows(scenario, seed)
    write_csv(Path(out_dir) / "sweep.csv", SWEEP_HEADER, rows)
    errors = sum(1 for r in rows if r[-1])
    return {"rows": len(rows), "errors": errors}


# -- demo -----------------------------------------------------------------------


def _quadruped_gait_phases(period_s: float, cycles: int):
    """Alternating limb-pair drive: half a period per phase."""
    stroke_front = {"left": Vent(1.0), "middle": Supply("forward"), "right": Vent(1.0)}
    stroke_rear = {"left": Vent(1.0), "middle": Supply("reverse"), "right": Vent(1.0)}
    phases = []
    for c in range(cycles):
        phases.append((f"cycle{c}_a", {"front": stroke_front, "rear": stroke_rear},
                       period_s / 2.0))
        phases.append((f"cycle{c}_b", {"front": stroke_rear, "rear": stroke_front},
                       period_s / 2.0))
    return phases


def demo_trace(scenario: Scenario, out_dir=None):
    """Run the configured preset; returns (header, rows)."""
    cfg = scenario.demo
    if cfg is None:
        raise ScenarioError("scenario has no demo block")
    subject = scenario.subject
    fluid = scenario.fluid(subject.fluid_name)

    if cfg.preset == "gripper_states":
        if not isinstance(subject, GripperSubject):
            raise ScenarioError("gripper_states preset needs a gripper subject")
        phases = [(name, roles, cfg.hold_s) for name, roles in GRIPPER_DEMO_STATES]

        def build(roles):
            from .assembly import build_gripper_network

            gnet = build_gripper_network(subject.assembly.with_ports(roles), fluid)
            return gnet.network, dict(gnet.fragments)

    elif cfg.preset == "quadruped_swim":
        if not isinstance(subject, QuadrupedSubject):
            raise ScenarioError("quadruped_swim preset needs a quadruped subject")
        phases = _quadruped_gait_phases(cfg.period_s, cfg.cycles)

        def build(roles):
            from .assembly import build_quadruped_network

            asm = QuadrupedAssembly(
                pair_front=subject.assembly.pair_front.with_ports(roles["front"]),
                pair_rear=subject.assembly.pair_rear.with_ports(roles["rear"]))
            qnet = build_quadruped_network(asm, fluid)
            return qnet.network, qnet.fragments()

    else:
        raise ScenarioError(f"unknown demo preset {cfg.preset!r}")

    limb_names = None
    header = None
    rows = []
    stepper = None
    t = 0.0
    for phase_name, roles, hold in phases:
        net, frags = build(roles)
        if stepper is None:
            stepper = TransientStepper(net, cfg.dt, options=scenario.solver)
            limb_names = sorted(frags)
            header = (["t_s", "phase"]
                      + [f"kappa_{n}" for n in limb_names]
                      + [f"dp_{n}" for n in limb_names]
                      + [f"flow_{n}" for n in limb_names])
            rows.append(_demo_row(0.0, phase_name, stepper.state, frags, limb_names))
        else:
            stepper.set_network(net)
        steps = max(1, int(round(hold / cfg.dt)))
        for _ in range(steps):
            state = stepper.step()
            t += cfg.dt
            rows.append(_demo_row(t, phase_name, state, frags, limb_names))
    return header, rows


def _demo_row(t, phase, state, frags, limb_names):
    acts = {n: actuator_state(state, frags[n]) for n in limb_names}
    return ([t, phase] + [acts[n].curvature for n in limb_names]
            + [acts[n].delta_p_chambers for n in limb_names]
            + [acts[n].flow_through for n in limb_names])


def run_demo(scenario: Scenario, out_dir) -> dict:
    header, rows = demo_trace(scenario)
    write_csv(Path(out_dir) / "demo_trace.csv", header, rows)
    return {"rows": len(rows), "preset": scenario.demo.preset}


# -- enumerate --------------------------------------------------------------------


ENUM_HEADER = ["index", "supply_port", "direction", "opening_left", "opening_middle",
               "opening_right", "kappa_a", "kappa_b", "pattern", "error"]


def run_enumerate(scenario: Scenario, out_dir) -> dict:
    subject = scenario.subject
    if not isinstance(subject, GripperSubject):
        raise ScenarioError("enumerate needs a gripper subject")
    cfg = scenario.enumerate
    grid = cfg.grid if cfg else (0.0, 0.25, 0.5, 0.75, 1.0)
    fluid = scenario.fluid(subject.fluid_name)
    result = enumerate_configurations(subject.assembly, grid, fluid, scenario.solver)

    rows = []
    for i, c in enumerate(result.configurations):
        openings = {p: c.openings.get(p) for p in ("left", "middle", "right")}
        rows.append([
            i, c.supply_port, c.direction,
            openings["left"], openings["middle"], openings["right"],
            c.kappa["a"] if c.kappa else None,
            c.kappa["b"] if c.kappa else None,
            "".join(c.pattern) if c.pattern else None,
            c.error,
        ])
    write_csv(Path(out_dir) / "configurations.csv", ENUM_HEADER, rows)
    patterns = ["".join(p) for p in result.patterns()]
    write_json(Path(out_dir) / "patterns.json", {"patterns": patterns})
    return {"configurations": len(rows), "patterns": patterns}


# -- mocap ------------------------------------------------------------------------


def run_mocap(input_path, scenario: Scenario, out_dir) -> dict:
    cfg = scenario.mocap
    frames = read_marker_csv(input_path)
    series = curvature_series_from_frames(frames)
    smoothed = smooth(series, cfg.smoothing_window)
    summary = extract_response(smoothed, rate_threshold=cfg.rate_threshold,
                               window=cfg.window_s, start_fraction=cfg.start_fraction)
    out = Path(out_dir)
    # module-internal curvature is 1/mm (marker coordinates are mm);
    # emitted CSV and summary are SI (1/m)
    write_csv(out / "curvature.csv", ["t_s", "curvature_per_m"],
              [[float(t), float(v) * 1000.0]
               for t, v in zip(smoothed.times, smoothed.values)])
    payload = {
        "start_time_s": summary.start_time,
        "response_time_s": summary.response_time,
        "final_curvature_per_m": summary.final_curvature * 1000.0,
    }
    write_json(out / "mocap_summary.json", payload)
    return payload
