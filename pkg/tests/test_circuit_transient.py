import math

import numpy as np
import pytest

from softflow.circuit import (
    OpenCircuitError,
    ComplianceChamber,
    Constriction,
    ControlSchedule,
    ConvergenceError,
    Element,
    FlowSource,
    Node,
    PressureSource,
    SolverOptions,
    make_network,
    simulate_transient,
    solve_steady,
)

from conftest import channel_for_resistance

NO_INERTANCE = SolverOptions(include_inertance=False)


def test_rc_charging_reaches_63_percent_at_tau(water):
    r, c, p = 1e8, 1e-9, 1000.0
    net = make_network(
        [Node("a"), Node("n"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=p)),
         Element("ch", "a", "n", channel_for_resistance(r)),
         Element("cap", "n", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=c))],
        water)
    tau = r * c
    dt = tau / 500.0
    trace = simulate_transient(net, ControlSchedule(), t_end=5.0 * tau, dt=dt,
                               options=NO_INERTANCE)
    p_n = trace.pressures("n")
    i_tau = int(round(tau / dt))
    assert p_n[i_tau] / p == pytest.approx(1.0 - math.exp(-1.0), abs=5e-3)
    # whole curve tracks the analytic exponential
    analytic = p * (1.0 - np.exp(-trace.times / tau))
    assert np.max(np.abs(p_n - analytic)) / p < 5e-3
    # inrush at t = 0: chamber empty, full drop across the channel
    assert trace.flows("ch")[0] == pytest.approx(p / r, rel=1e-9)


def test_no_chambers_matches_repeated_steady_solves(water):
    net = make_network(
        [Node("a"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=2000.0)),
         Element("vent", "a", "gnd", Constriction(reference_area=1e-5, opening=1.0)),
         Element("ch", "a", "gnd", channel_for_resistance(1e8))],
        water)
    schedule = ControlSchedule(((0.0, {"vent": 1.0}), (0.05, {"vent": 0.4})))
    trace = simulate_transient(net, schedule, t_end=0.1, dt=0.01)
    for t, st in zip(trace.times, trace.states):
        ref = solve_steady(net, opening_overrides={"vent": schedule.at(t)["vent"]})
        for nid, p_ref in ref.node_pressures.items():
            assert st.node_pressures[nid] == pytest.approx(p_ref, rel=1e-9, abs=1e-12)


def test_dt_refinement_converges(water):
    net = make_network(
        [Node("a"), Node("n"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=1500.0)),
         Element("ch", "a", "n", channel_for_resistance(2e8)),
         Element("cap", "n", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=2e-9))],
        water)
    t_end = 1.0

    def final_pressure(dt):
        return simulate_transient(net, ControlSchedule(), t_end, dt).pressures("n")[-1]

    p1 = final_pressure(0.02)
    p2 = final_pressure(0.01)
    assert abs(p2 - p1) / abs(p2) < 0.01


def test_vent_step_reroutes_flow_and_matches_dense_reference(water):
    # chamber node fed through a channel; the vent constriction and a leak
    # path compete for the outflow
    net = make_network(
        [Node("a"), Node("b"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=2000.0)),
         Element("feed", "a", "b", channel_for_resistance(2e7)),
         Element("vent", "b", "gnd", Constriction(reference_area=5e-6, opening=1.0)),
         Element("leak", "b", "gnd", channel_for_resistance(5e8)),
         Element("cap", "b", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=1e-9))],
        water)
    schedule = ControlSchedule(((0.2, {"vent": 0.15}),))
    t_end = 0.4
    coarse = simulate_transient(net, schedule, t_end, dt=1e-3, options=NO_INERTANCE)
    dense = simulate_transient(net, schedule, t_end, dt=1e-5, options=NO_INERTANCE)
    p_c = coarse.pressures("b")[-1]
    p_d = dense.pressures("b")[-1]
    assert p_c == pytest.approx(p_d, rel=2e-2)
    q = coarse.flows("vent")
    i_step = int(round(0.2 / 1e-3))
    assert abs(q[i_step + 5]) < abs(q[i_step - 5])  # closing the vent reduces its flow


def test_pressure_source_directly_across_chamber_is_rejected(water):
    # ideal source straight onto a chamber has no consistent inrush state
    net = make_network(
        [Node("a"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=2000.0)),
         Element("cap", "a", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=1e-9))],
        water)
    with pytest.raises(OpenCircuitError):
        simulate_transient(net, ControlSchedule(), t_end=0.01, dt=0.001)


def test_chamber_volume_tracks_pressure(water):
    c = 1e-9
    net = make_network(
        [Node("a"), Node("n"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=1000.0)),
         Element("ch", "a", "n", channel_for_resistance(1e8)),
         Element("cap", "n", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=c))],
        water)
    trace = simulate_transient(net, ControlSchedule(), t_end=0.5, dt=0.01)
    vol = trace.chamber_volumes["cap"]
    p_n = trace.pressures("n")
    assert np.allclose(vol, 1e-6 + c * p_n, rtol=1e-12)
    assert vol[0] == pytest.approx(1e-6, rel=1e-12)


def test_gas_chamber_settles_to_source_pressure(air):
    net = make_network(
        [Node("a"), Node("n"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=2.0e5)),
         Element("ch", "a", "n", channel_for_resistance(1e8, mu=1.8e-5)),
         Element("cap", "n", "gnd", ComplianceChamber(rest_volume=5e-6, compliance=1e-9))],
        air)
    trace = simulate_transient(net, ControlSchedule(), t_end=2.0, dt=1e-3)
    p_n = trace.pressures("n")
    assert p_n[-1] == pytest.approx(2.0e5, rel=1e-3)
    assert np.all(np.diff(p_n) > -1e-9)  # monotone charge-up


def test_initial_chamber_pressure_is_respected(water):
    net = make_network(
        [Node("a"), Node("n"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=1000.0)),
         Element("ch", "a", "n", channel_for_resistance(1e8)),
         Element("cap", "n", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=1e-9))],
        water)
    trace = simulate_transient(net, ControlSchedule(), t_end=0.01, dt=0.001,
                               initial_chamber_pressures={"cap": 400.0})
    assert trace.pressures("n")[0] == pytest.approx(400.0, rel=1e-12)


def test_transient_determinism(water):
    net = make_network(
        [Node("a"), Node("n"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=1800.0)),
         Element("ch", "a", "n", channel_for_resistance(1e8)),
         Element("cap", "n", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=1e-9))],
        water)
    t1 = simulate_transient(net, ControlSchedule(), t_end=0.2, dt=0.005)
    t2 = simulate_transient(net, ControlSchedule(), t_end=0.2, dt=0.005)
    assert list(t1.pressures("n")) == list(t2.pressures("n"))
    assert list(t1.flows("ch")) == list(t2.flows("ch"))


def test_step_failure_carries_time(water):
    net = make_network(
        [Node("a"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", FlowSource(q_set=1e-5)),
         Element("vent", "a", "gnd", Constriction(reference_area=1e-5, opening=1.0))],
        water)
    schedule = ControlSchedule(((0.05, {"vent": 0.0}),))
    with pytest.raises(Exception) as exc_info:
        simulate_transient(net, schedule, t_end=0.1, dt=0.01)
    assert exc_info.type.__name__ in ("OpenCircuitError", "ConvergenceError")


def test_bad_dt_rejected(water):
    net = make_network(
        [Node("a"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=1000.0)),
         Element("ch", "a", "gnd", channel_for_resistance(1e8))],
        water)
    with pytest.raises(ValueError):
        simulate_transient(net, ControlSchedule(), t_end=1.0, dt=0.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ControlSchedule(((1.0, {}), (0.5, {})))
    with pytest.raises(ValueError):
        ControlSchedule(((-1.0, {}),))
    sched = ControlSchedule(((0.0, {"v": 1.0}), (1.0, {"v": 0.5})))
    assert sched.at(0.5) == {"v": 1.0}
    assert sched.at(1.0) == {"v": 0.5}
    assert sched.at(2.0) == {"v": 0.5}


def test_channel_inertance_causes_overshoot(water):
    # water column in a wide duct feeding a stiff chamber rings like an L-C
    # loop; dropping the inertance term kills the overshoot
    net = make_network(
        [Node("a"), Node("b"), Node("gnd", reservoir_pressure=0.0)],
        [Element("src", "gnd", "a", PressureSource(p_set=2000.0)),
         Element("feed", "a", "b", channel_for_resistance(2e7)),
         Element("leak", "b", "gnd", channel_for_resistance(5e8)),
         Element("cap", "b", "gnd", ComplianceChamber(rest_volume=1e-6, compliance=1e-9))],
        water)
    with_inertia = simulate_transient(net, ControlSchedule(), t_end=0.6, dt=2e-4)
    without = simulate_transient(net, ControlSchedule(), t_end=0.6, dt=2e-4,
                                 options=NO_INERTANCE)
    p_final = solve_steady(net).node_pressures["b"]
    assert max(with_inertia.pressures("b")) > 1.2 * p_final
    assert max(without.pressures("b")) < 1.001 * p_final
