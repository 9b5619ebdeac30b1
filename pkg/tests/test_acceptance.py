"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Tolerances are pinned here and nowhere else.
"""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from softflow.actuator import (
    ActuatorModel,
    ActuatorRig,
    SourceSpec,
    VentSpec,
    actuator_state,
    build_rig_network,
    calibrate_response_ratio,
    fill_time_constant,
    quasi_static_curvature,
    static_variant,
)
from softflow.assembly import (
    Blocked,
    GripperAssembly,
    Supply,
    Vent,
    build_gripper_network,
    enumerate_configurations,
    finger_states,
)
from softflow.circuit import (
    audit_balanced,
    power_audit,
    solve_steady,
)
from softflow.fluids import default_fluid_library

FLUIDS = default_fluid_library()
WATER, AIR = FLUIDS["water_20c"], FLUIDS["air_20c"]
SWEEP_BARS = (1.25, 1.5, 1.75, 2.0, 2.25, 2.5)
MODEL = ActuatorModel()


def ok(name):
    print(f"[ACCEPT] {name}: PASS")


def solve_rig(model, fluid, pressure, direction="forward", source_kind="pressure"):
    rig = ActuatorRig(model=model, source=SourceSpec(source_kind, pressure),
                      direction=direction, vent=VentSpec(ideal=True))
    net, frag, _ = build_rig_network(rig, fluid)
    state = solve_steady(net)
    return state, frag, net


def test_criterion_fluid_independence():
    """Equal chamber pressure difference gives identical curvature for air
    and water; the loop flow rates differ by the viscosity ratio."""
    for p_bar in SWEEP_BARS:
        st_a, frag_a, _ = solve_rig(MODEL, AIR, p_bar * 1e5)
        st_w, frag_w, _ = solve_rig(MODEL, WATER, p_bar * 1e5)
        act_a = actuator_state(st_a, frag_a)
        act_w = actuator_state(st_w, frag_w)
        # the model-level map itself is fluid-blind: exact identity
        dp = act_a.delta_p_chambers
        assert quasi_static_curvature(dp, MODEL) == quasi_static_curvature(dp, MODEL)
        # solved at equal source pressure the linear loops agree on dp, so
        # curvatures agree to 1e-9 relative while flows differ per viscosity
        assert act_a.curvature == pytest.approx(act_w.curvature, rel=1e-9)
        ratio = act_a.flow_through / act_w.flow_through
        assert ratio == pytest.approx(WATER.dynamic_viscosity / AIR.dynamic_viscosity,
                                      rel=1e-9)
    ok("fluid independence across the sweep")


def test_criterion_direction_symmetry_and_asymmetry_calibration():
    # symmetric actuator: both directions identical to 1e-9 at every pressure
    for p_bar in SWEEP_BARS:
        st_f, frag_f, _ = solve_rig(MODEL, WATER, p_bar * 1e5, "forward")
        st_r, frag_r, _ = solve_rig(MODEL, WATER, p_bar * 1e5, "reverse")
        kf = abs(actuator_state(st_f, frag_f).curvature)
        kr = abs(actuator_state(st_r, frag_r).curvature)
        assert kf == pytest.approx(kr, rel=1e-9)

    # a tip skew reproduces the observed direction variance; find the skew
    # that yields 11% by bisection on a constant-flow rig
    def variance(eps):
        m = replace(MODEL, asymmetry=eps)
        st_f, frag_f, _ = solve_rig(m, WATER, 5e-5, "forward", source_kind="flow")
        st_r, frag_r, _ = solve_rig(m, WATER, 5e-5, "reverse", source_kind="flow")
        kf = abs(actuator_state(st_f, frag_f).curvature)
        kr = abs(actuator_state(st_r, frag_r).curvature)
        return abs(kf - kr) / max(kf, kr)

    grid = [variance(e) for e in (0.0, 0.1, 0.2, 0.3)]
    assert all(b > a for a, b in zip(grid, grid[1:]))  # monotone in the skew

    lo, hi = 0.0, 0.4
    assert variance(hi) > 0.11 > variance(lo)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if variance(mid) < 0.11:
            lo = mid
        else:
            hi = mid
    eps_star = 0.5 * (lo + hi)
    v_star = variance(eps_star)
    assert v_star == pytest.approx(0.11, abs=0.01)
    ok(f"direction symmetry (and 11% variance at tip skew {eps_star:.4f})")


def test_criterion_series_half_pressure():
    base = GripperAssembly(vents=VentSpec(ideal=True),
                           source=SourceSpec("pressure", 2.0e5))
    par = build_gripper_network(base, WATER)
    ser = build_gripper_network(base.with_ports(
        {"left": Supply("forward"), "middle": Blocked(), "right": Vent(1.0)}), WATER)
    dp_par = abs(finger_states(solve_steady(par.network), par)["a"].delta_p_chambers)
    ser_state = solve_steady(ser.network)
    for act in finger_states(ser_state, ser).values():
        assert abs(act.delta_p_chambers) == pytest.approx(0.5 * dp_par, rel=1e-6)
    ok("series mode halves the per-actuator pressure difference")


def test_criterion_independent_control_with_three_inputs():
    t0 = time.monotonic()
    asm = GripperAssembly(source=SourceSpec("pressure", 2.0e5))
    result = enumerate_configurations(asm, [0.0, 0.25, 0.5, 0.75, 1.0], WATER)
    elapsed = time.monotonic() - t0
    patterns = set(result.patterns())
    for target in (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-")):
        assert target in patterns
    assert elapsed < 60.0
    ok(f"all four sign patterns reachable with fan-in 3 ({elapsed:.1f} s)")


def test_criterion_recirculating_deficit():
    def deficit(p):
        m = replace(MODEL, parasitic_fraction=p)
        st_r, frag_r, _ = solve_rig(m, WATER, 2.0e5)
        st_s, frag_s, _ = solve_rig(static_variant(m), WATER, 2.0e5)
        k_r = abs(actuator_state(st_r, frag_r).curvature)
        k_s = abs(actuator_state(st_s, frag_s).curvature)
        return (k_s - k_r) / k_s

    d9 = deficit(0.09)
    assert d9 == pytest.approx(0.09, abs=0.005)
    assert deficit(0.0) == pytest.approx(0.0, abs=0.005)
    samples = [deficit(p) for p in (0.0, 0.03, 0.06, 0.09, 0.12)]
    assert all(b > a for a, b in zip(samples, samples[1:]))
    ok(f"recirculating deficit {d9 * 100:.2f}% at parasitic fraction 9%")


def test_criterion_response_time_behaviour():
    # all-linear loop: the fill time constant is flat across the sweep
    taus = []
    for p_bar in SWEEP_BARS:
        st, frag, _ = solve_rig(MODEL, WATER, p_bar * 1e5)
        act = actuator_state(st, frag)
        taus.append(fill_time_constant(MODEL, abs(act.flow_through), act.curvature))
    spread = (max(taus) - min(taus)) / min(taus)
    assert spread < 0.01

    # documented calibration: scale the chamber compliance until the
    # water/air response-time ratio lands on the published-style target;
    # reported, not hard-asserted (absolute geometry is unknown)
    report = calibrate_response_ratio(MODEL, AIR, WATER, pressure=2.0e5, iters=30)
    assert report["ratio"] > 1.0  # water always settles slower
    assert report["water"]["tau_fill"] > report["air"]["tau_fill"]
    ok(f"fill time flat over sweep ({spread * 100:.3f}%); calibrated "
       f"response-time ratio {report['ratio']:.3f} vs target {report['target']}"
       f" at compliance scale {report['compliance_scale']:.4g}")


def test_criterion_solver_properties():
    # KCL and energy audit on every scenario solved here
    solved = []
    for p_bar in SWEEP_BARS:
        for fluid in (WATER, AIR):
            st, _, net = solve_rig(MODEL, fluid, p_bar * 1e5)
            solved.append((st, net))
    asm = GripperAssembly(source=SourceSpec("pressure", 2.0e5))
    for ports in ({"left": Vent(1.0), "middle": Supply("forward"), "right": Vent(0.5)},
                  {"left": Supply("forward"), "middle": Blocked(), "right": Vent(1.0)}):
        gnet = build_gripper_network(asm.with_ports(ports), WATER)
        solved.append((solve_steady(gnet.network), gnet.network))
    for st, net in solved:
        assert st.kcl_residual < 1e-9
        assert audit_balanced(power_audit(st, net), 1e-6)

    # linear network against the direct solve oracle
    from conftest import channel_for_resistance
    from softflow.circuit import Element, FlowSource, Node, PressureSource, make_network
    from test_circuit_steady import bisect, constriction_with_coefficient, linear_mna_solve

    net = make_network(
        [Node("n1"), Node("n2"), Node("gnd", reservoir_pressure=0.0)],
        [Element("ps", "gnd", "n1", PressureSource(p_set=4000.0)),
         Element("c12", "n1", "n2", channel_for_resistance(1e8)),
         Element("c2g", "n2", "gnd", channel_for_resistance(3e8)),
         Element("c1g", "n1", "gnd", channel_for_resistance(2e8)),
         Element("fs", "gnd", "n2", FlowSource(q_set=2e-6))],
        WATER)
    st = solve_steady(net)
    for nid, p_ref in linear_mna_solve(net).items():
        assert st.node_pressures[nid] == pytest.approx(p_ref, rel=1e-10)

    # nonlinear single loop against the bisection oracle
    k, r, p = 1e13, 1e8, 3000.0
    net2 = make_network(
        [Node("a"), Node("m"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=p)),
         Element("con", "a", "m", constriction_with_coefficient(k, WATER)),
         Element("ch", "m", "gnd", channel_for_resistance(r))],
        WATER)
    q = solve_steady(net2).element_flows["con"]
    q_oracle = bisect(lambda x: k * x * x + r * x - p, 0.0, 1.0)
    assert q == pytest.approx(q_oracle, rel=1e-9)
    assert q == pytest.approx(1.3028e-5, rel=1e-4)
    ok("solver properties: KCL < 1e-9, energy balance 1e-6, oracle matches")


def test_criterion_mocap_pipeline():
    from softflow.mocap import CurvatureSeries, extract_response, fit_arc, synthesize_markers
    from test_mocap import arc_points, dense_rule_oracle

    fit = fit_arc(arc_points(radius=50.0))
    assert fit.radius == pytest.approx(50.0, abs=1e-6)

    pts = synthesize_markers(20.0, 0.1)
    assert fit_arc(pts).curvature * 1000.0 == pytest.approx(20.0, rel=1e-9)

    tau, kinf, rate, duration = 0.5, 0.02, 240.0, 6.0

    def kfun(t):
        return kinf * (1.0 - math.exp(-t / tau))

    t = np.arange(0.0, duration, 1.0 / rate)
    series = CurvatureSeries(sample_rate=rate, times=t,
                             values=np.array([kfun(x) for x in t]))
    got = extract_response(series)
    start_o, resp_o = dense_rule_oracle(kfun, duration)
    assert abs(got.response_time - resp_o) <= 1.0 / rate + 1.0 / 24000.0
    ok("mocap pipeline: fit to 1e-6 mm, round trip 1e-9, settle rule on oracle")


def test_criterion_deterministic_outputs(tmp_path):
    from softflow.runs import run_sweep
    from softflow.scenario import load_scenario

    scenario_path = Path(__file__).resolve().parents[1] / "scenarios" / "pressure_sweep.json"
    outputs = []
    for sub in ("a", "b"):
        scenario = load_scenario(scenario_path)
        run_sweep(scenario, tmp_path / sub, seed=123)
        outputs.append((tmp_path / sub / "sweep.csv").read_bytes())
    assert outputs[0] == outputs[1]
    ok("byte-identical sweep outputs across repeated runs")


def test_criterion_teleop_round_trip(tmp_path):
    """Scripted client drives the demonstration preset sequence through the
    live service; the recorded log replayed offline reproduces the streamed
    curvature within 1e-9."""
    import asyncio
    import json

    from softflow.assembly import GRIPPER_DEMO_STATES
    from softflow.circuit import SolverOptions
    from softflow.scenario import Scenario
    from softflow.teleop import TeleopClient, TeleopServer, replay_log, role_to_json

    record = tmp_path / "drive.jsonl"
    subject_doc = {"type": "gripper", "fluid": "water_20c",
                   "source": {"kind": "pressure", "value_bar": 2.0}}

    async def drive():
        scenario = Scenario(fluids=default_fluid_library(), solver=SolverOptions())
        scenario.teleop.speed = 100.0  # fast, but bounded tick production
        server = await TeleopServer(scenario, record_path=record).start()
        try:
            async with TeleopClient(server.host, server.port) as client:
                await client.create(subject_doc)
                seqs = []
                for _name, roles in GRIPPER_DEMO_STATES:
                    ports = {p: role_to_json(r) for p, r in roles.items()}
                    ack = await client.controls(ports)
                    assert ack["payload"]["status"] == "applied"
                    seqs.append(ack["seq"])
                    await client.snapshot_after(ack["payload"]["effective_tick"] + 10)
                assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        finally:
            await server.stop()

    asyncio.run(asyncio.wait_for(drive(), timeout=300))

    events = [json.loads(line) for line in record.read_text().splitlines()]
    streamed = {e["tick"]: e["limbs"] for e in events if e["kind"] == "snapshot"}
    replayed = replay_log(record, default_fluid_library())
    compared = 0
    for snap in replayed:
        live = streamed.get(snap["tick"])
        if live is None:
            continue
        for limb, vals in live.items():
            assert snap["limbs"][limb]["kappa"] == pytest.approx(
                vals["kappa"], rel=1e-9, abs=1e-12)
            compared += 1
    assert compared >= 2 * len(GRIPPER_DEMO_STATES)
    ok(f"teleop round trip: {compared} streamed samples reproduced offline")
