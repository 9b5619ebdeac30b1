"""Steady-state solve and the power audit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .compiled import CompiledNetwork, SolverOptions, compile_network
from .elements import (
    ComplianceChamber,
    ConvergenceError,
    Network,
    OpenCircuitError,
    PASSIVE_LAWS,
    SOURCE_LAWS,
)


@dataclass(frozen=True)
class SteadyState:
    """Solved node pressures (Pa gauge) and element flows (m3/s, from -> to).

    residual_norm is the worst pressure-law residual in Pa; kcl_residual the
    worst node flow imbalance in m3/s.  Blocked elements appear with zero
    flow; interior nodes isolated by blocking appear as NaN pressure.
    """

    node_pressures: dict[str, float]
    element_flows: dict[str, float]
    residual_norm: float
    kcl_residual: float
    iterations: int = 0

    def pressure(self, node_id: str) -> float:
        return self.node_pressures[node_id]

    def flow(self, element_id: str) -> float:
        return self.element_flows[element_id]


def _run_kernel(comp: CompiledNetwork, x0, dt_inv, chamber_mode,
                q_prev, dp_prev, m_prev, time=None):
    opts = comp.options
    row_pa = comp.row_is_pa(chamber_mode)
    try:
        x, status, iters, kcl, law_p, law_q = K.newton_solve(
            comp.n_interior, comp.kinds, comp.fidx, comp.tidx, comp.ffix, comp.tfix,
            comp.pa, comp.pb, comp.pc,
            dt_inv, chamber_mode, q_prev, dp_prev, m_prev,
            opts.atmospheric_pressure, row_pa,
            comp.p_scale, comp.q_scale, x0,
            opts.tol_kcl, opts.tol_law, opts.max_iter,
        )
    except np.linalg.LinAlgError as exc:
        raise OpenCircuitError(
            f"singular network equations ({exc}); a source is likely missing a "
            f"return path or pressures are underdetermined"
        ) from None
    if status != K.STATUS_OK:
        reason = "max_iter exceeded" if status == K.STATUS_MAX_ITER else "stalled"
        raise ConvergenceError(
            f"Newton did not converge ({reason}; kcl={kcl:.3e} m3/s, law={law_p:.3e} Pa)",
            kcl_residual=kcl, law_residual=law_p, time=time,
        )
    return x, iters, kcl, law_p


def _wrap_state(comp: CompiledNetwork, x, iters, kcl, law_p) -> SteadyState:
    pressures = {}
    for nid, i in comp.node_pos.items():
        pressures[nid] = float(x[i])
    for node in comp.network.nodes:
        if node.is_reservoir:
            pressures[node.id] = float(node.reservoir_pressure)
    for nid in comp.orphan_interior:
        pressures[nid] = float("nan")
    flows = {eid: float(x[comp.n_interior + e]) for e, eid in enumerate(comp.element_ids)}
    for eid in comp.blocked_ids:
        flows[eid] = 0.0
    return SteadyState(node_pressures=pressures, element_flows=flows,
                       residual_norm=float(law_p), kcl_residual=float(kcl),
                       iterations=int(iters))


def solve_steady(network: Network, options: SolverOptions | None = None, *,
                 opening_overrides: dict | None = None,
                 source_overrides: dict | None = None,
                 initial_guess: np.ndarray | None = None) -> SteadyState:
    """Solve the nonlinear nodal equations of a network at steady state.

    Compliance chambers carry zero flow; blocked constrictions are absent
    edges.  Raises OpenCircuitError for singular topologies and
    ConvergenceError when Newton fails.
    """
    comp = compile_network(network, options,
                           opening_overrides=opening_overrides,
                           source_overrides=source_overrides)
    n_e = len(comp.element_ids)
    zeros = np.zeros(n_e)
    x0 = comp.initial_guess() if initial_guess is None else initial_guess
    x, iters, kcl, law_p = _run_kernel(comp, x0, 0.0, K.CHAMBER_STEADY,
                                       zeros, zeros, zeros)
    return _wrap_state(comp, x, iters, kcl, law_p)


def element_drops(state: SteadyState, network: Network) -> dict[str, float]:
    """Realised p_from - p_to per element, from the solved node pressures."""
    out = {}
    for el in network.elements:
        pf = state.node_pressures[el.from_node]
        pt = state.node_pressures[el.to_node]
        out[el.id] = pf - pt
    return out


def power_audit(state: SteadyState, network: Network) -> dict[str, float]:
    """Hydraulic power bookkeeping of a solved state.

    source_power sums the power delivered by flow/pressure sources plus the
    net power injected by reservoirs held at nonzero gauge pressure;
    dissipated_power sums dp*q over passive elements; stored_power is the
    instantaneous power flowing into compliance chambers (zero at steady
    state).  By Tellegen's theorem source = dissipated + stored up to the
    solver residual.
    """
    drops = element_drops(state, network)
    source = 0.0
    dissipated = 0.0
    stored = 0.0
    reservoir_out: dict[str, float] = {}
    for el in network.elements:
        q = state.element_flows[el.id]
        dp = drops[el.id]
        if isinstance(el.law, PASSIVE_LAWS):
            dissipated += dp * q
        elif isinstance(el.law, SOURCE_LAWS):
            source += -dp * q
        elif isinstance(el.law, ComplianceChamber):
            stored += dp * q
        fnode = network.node_index[el.from_node]
        tnode = network.node_index[el.to_node]
        if fnode.is_reservoir:
            reservoir_out[el.from_node] = reservoir_out.get(el.from_node, 0.0) + q
        if tnode.is_reservoir:
            reservoir_out[el.to_node] = reservoir_out.get(el.to_node, 0.0) - q
    for nid, q_out in reservoir_out.items():
        source += network.node_index[nid].reservoir_pressure * q_out
    return {
        "source_power": source,
        "dissipated_power": dissipated,
        "stored_power": stored,
    }


def audit_balanced(audit: dict[str, float], tol_energy: float = 1e-6,
                   atol: float = 1e-15) -> bool:
    lhs = audit["source_power"]
    rhs = audit["dissipated_power"] + audit["stored_power"]
    scale = max(abs(lhs), abs(rhs))
    if scale < atol:
        return True
    return abs(lhs - rhs) <= tol_energy * scale
