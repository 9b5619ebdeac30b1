"""Transient simulation: backward-Euler stepping of the compliance dynamics.

The algebraic network is re-solved at every step.  Compliance chambers are
the differential states; channels additionally pick up an inertance term
I dq/dt.  Initialisation at t = 0 pins every chamber to its given initial
pressure and solves the rest of the network consistently, which reproduces
an inrush flow rather than jumping to the final steady state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .compiled import SolverOptions, compile_network
from .elements import (
    ComplianceChamber,
    Constriction,
    ConvergenceError,
    FlowSource,
    Network,
    PressureSource,
)
from .steady import SteadyState, _run_kernel, _wrap_state


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant settings over time.

    Each entry is (time, {element_id: value}); a value is an opening for
    constrictions and a set-point for sources.  The setting active at time t
    is the merge of all entries with entry time <= t, later entries winning.
    """

    entries: tuple = ()

    def __post_init__(self):
        times = [t for t, _ in self.entries]
        if any(t < 0.0 for t in times):
            raise ValueError("schedule times must be non-negative")
        if times != sorted(times):
            raise ValueError("schedule entries must be sorted by time")

    @classmethod
    def constant(cls, settings: dict | None = None) -> "ControlSchedule":
        if not settings:
            return cls(())
        return cls(((0.0, dict(settings)),))

    def at(self, t: float) -> dict:
        merged: dict = {}
        for ts, settings in self.entries:
            if ts <= t * (1 + 1e-12) + 1e-15:
                merged.update(settings)
            else:
                break
        return merged


def split_controls(network: Network, settings: dict):
    """Split a flat {element_id: value} dict into opening and source overrides."""
    openings = {}
    sources = {}
    for eid, value in settings.items():
        el = network.element(eid)
        if isinstance(el.law, Constriction):
            openings[eid] = float(value)
        elif isinstance(el.law, (FlowSource, PressureSource)):
            sources[eid] = float(value)
        else:
            raise ValueError(f"element {eid!r} is not controllable")
    return openings, sources


@dataclass
class TransientTrace:
    times: np.ndarray
    states: list
    chamber_volumes: dict[str, np.ndarray]

    def pressures(self, node_id: str) -> np.ndarray:
        return np.array([s.node_pressures[node_id] for s in self.states])

    def flows(self, element_id: str) -> np.ndarray:
        return np.array([s.element_flows[element_id] for s in self.states])

    def final(self) -> SteadyState:
        return self.states[-1]


class TransientStepper:
    """Owns the evolving chamber state and advances it one dt at a time.

    The network may be swapped between steps (live re-plumbing): chamber
    pressures, masses and element flows carry over by id, new elements start
    from rest.
    """

    def __init__(self, network: Network, dt: float,
                 options: SolverOptions | None = None,
                 initial_chamber_pressures: dict | None = None,
                 controls: dict | None = None):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.dt = dt
        self.options = options or SolverOptions()
        self.t = 0.0
        self.network = network
        self._controls = dict(controls or {})
        init = dict(initial_chamber_pressures or {})
        self.chamber_dp = {}
        for el in network.elements:
            if isinstance(el.law, ComplianceChamber):
                self.chamber_dp[el.id] = float(init.pop(el.id, 0.0))
        if init:
            raise ValueError(f"initial pressures for unknown chambers: {sorted(init)}")
        self.chamber_mass: dict[str, float] = {}
        self.flows: dict[str, float] = {}
        self._compile()
        self.state = self._initial_solve()

    # -- internals ---------------------------------------------------------

    def _compile(self):
        openings, sources = split_controls(self.network, self._controls)
        self.comp = compile_network(self.network, self.options,
                                    opening_overrides=openings,
                                    source_overrides=sources)
        self._chamber_pos = [e for e, eid in enumerate(self.comp.element_ids)
                             if self.comp.kinds[e] == K.K_CHAMBER]

    def _prev_arrays(self):
        n_e = len(self.comp.element_ids)
        q_prev = np.zeros(n_e)
        dp_prev = np.zeros(n_e)
        m_prev = np.zeros(n_e)
        for e, eid in enumerate(self.comp.element_ids):
            q_prev[e] = self.flows.get(eid, 0.0)
            if self.comp.kinds[e] == K.K_CHAMBER:
                dp_prev[e] = self.chamber_dp.get(eid, 0.0)
                m_prev[e] = self.chamber_mass.get(eid, 0.0)
        return q_prev, dp_prev, m_prev

    def _warm_start(self):
        x0 = self.comp.initial_guess()
        if self.state is not None:
            for nid, i in self.comp.node_pos.items():
                p = self.state.node_pressures.get(nid)
                if p is not None and np.isfinite(p):
                    x0[i] = p
            for e, eid in enumerate(self.comp.element_ids):
                x0[self.comp.n_interior + e] = self.flows.get(eid, 0.0)
        return x0

    def _initial_solve(self) -> SteadyState:
        self.state = None
        q_prev, dp_prev, m_prev = self._prev_arrays()
        x, iters, kcl, law_p = _run_kernel(
            self.comp, self.comp.initial_guess(), 0.0, K.CHAMBER_PIN,
            q_prev, dp_prev, m_prev, time=0.0)
        state = _wrap_state(self.comp, x, iters, kcl, law_p)
        self._absorb(state)
        return state

    def _absorb(self, state: SteadyState):
        self.state = state
        self.flows = dict(state.element_flows)
        p_atm = self.options.atmospheric_pressure
        gas = self.network.fluid.ideal_gas
        for el in self.network.elements:
            if not isinstance(el.law, ComplianceChamber):
                continue
            pf = state.node_pressures[el.from_node]
            pt = state.node_pressures[el.to_node]
            dp = pf - pt
            self.chamber_dp[el.id] = dp
            if gas is not None:
                rho = max(pf + p_atm, 1.0) / (gas.specific_gas_constant * gas.temperature)
                vol = el.law.rest_volume + el.law.compliance * dp
                self.chamber_mass[el.id] = rho * vol

    # -- public ------------------------------------------------------------

    def chamber_volumes(self) -> dict[str, float]:
        out = {}
        for el in self.network.elements:
            if isinstance(el.law, ComplianceChamber):
                out[el.id] = el.law.rest_volume + el.law.compliance * self.chamber_dp[el.id]
        return out

    def set_network(self, network: Network, controls: dict | None = None):
        """Swap topology live; chamber state and flows carry over by id."""
        self.network = network
        self._controls = dict(controls or {})
        kept = {}
        for el in network.elements:
            if isinstance(el.law, ComplianceChamber):
                kept[el.id] = self.chamber_dp.get(el.id, 0.0)
        self.chamber_dp = kept
        self.chamber_mass = {k: v for k, v in self.chamber_mass.items() if k in kept}
        self._compile()

    def step(self, controls: dict | None = None) -> SteadyState:
        if controls is not None and dict(controls) != self._controls:
            self._controls = dict(controls)
            self._compile()
        q_prev, dp_prev, m_prev = self._prev_arrays()
        t_next = self.t + self.dt
        try:
            x, iters, kcl, law_p = _run_kernel(
                self.comp, self._warm_start(), 1.0 / self.dt, K.CHAMBER_STEP,
                q_prev, dp_prev, m_prev, time=t_next)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"transient step failed at t={t_next:.6g} s: {exc}",
                kcl_residual=exc.kcl_residual, law_residual=exc.law_residual,
                time=t_next) from None
        self.t = t_next
        state = _wrap_state(self.comp, x, iters, kcl, law_p)
        self._absorb(state)
        return state


def simulate_transient(network: Network, schedule: ControlSchedule, t_end: float,
                       dt: float, options: SolverOptions | None = None,
                       initial_chamber_pressures: dict | None = None) -> TransientTrace:
    """Integrate a network over [0, t_end] with implicit (backward) stepping.

    t_end is rounded to a whole number of steps.  The schedule is sampled at
    each step time; changing an opening across the blocking threshold
    re-compiles the network on the fly.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t_end < 0.0:
        raise ValueError("t_end must be non-negative")
    n_steps = int(round(t_end / dt))
    stepper = TransientStepper(network, dt, options=options,
                               initial_chamber_pressures=initial_chamber_pressures,
                               controls=schedule.at(0.0))
    chamber_ids = sorted(stepper.chamber_dp)
    times = [0.0]
    states = [stepper.state]
    volumes = {cid: [stepper.chamber_volumes()[cid]] for cid in chamber_ids}
    for k in range(1, n_steps + 1):
        t = k * dt
        state = stepper.step(schedule.at(t))
        times.append(t)
        states.append(state)
        vols = stepper.chamber_volumes()
        for cid in chamber_ids:
            volumes[cid].append(vols[cid])
    return TransientTrace(times=np.array(times), states=states,
                          chamber_volumes={cid: np.array(v) for cid, v in volumes.items()})
