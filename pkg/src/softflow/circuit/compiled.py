"""Compilation of a Network into the flat arrays the Newton kernel consumes.

Blocked constrictions (opening at or below epsilon_open) are removed from the
solve entirely rather than being modelled as huge resistances, which keeps
the Jacobian well conditioned.  Interior nodes left without any active
element are excluded from the unknowns and reported as NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..fluids import reference_density
from . import kernels as K
from .elements import (
    Channel,
    ComplianceChamber,
    Constriction,
    FlowSource,
    Network,
    OpenCircuitError,
    PressureSource,
    TeslaValve,
)


@dataclass(frozen=True)
class SolverOptions:
    tol_kcl: float = 1e-9  # m3/s, Kirchhoff balance and flow-type laws
    tol_law: float = 1e-6  # Pa, pressure-type laws
    tol_energy: float = 1e-6  # relative, power audit
    max_iter: int = 80
    epsilon_open: float = 1e-6  # openings at/below count as blocked
    q_smooth: float = 1e-9  # m3/s, quadratic-law blend half-width
    atmospheric_pressure: float = 101325.0  # Pa
    include_inertance: bool = True  # transient channel dq/dt terms

    def with_overrides(self, **kwargs) -> "SolverOptions":
        return replace(self, **kwargs)


@dataclass
class CompiledNetwork:
    network: Network
    options: SolverOptions
    n_interior: int
    interior_ids: list[str]
    node_pos: dict[str, int]  # interior node id -> reduced index
    element_ids: list[str]  # active elements, network order
    blocked_ids: list[str]
    kinds: np.ndarray
    fidx: np.ndarray
    tidx: np.ndarray
    ffix: np.ndarray
    tfix: np.ndarray
    pa: np.ndarray
    pb: np.ndarray
    pc: np.ndarray
    p_scale: float
    q_scale: float
    orphan_interior: list[str] = field(default_factory=list)

    @property
    def n_unknowns(self) -> int:
        return self.n_interior + len(self.element_ids)

    def row_is_pa(self, chamber_mode: int) -> np.ndarray:
        """Residual row unit per active element: 1 = Pa, 0 = m3/s."""
        out = np.zeros(len(self.element_ids), dtype=np.int8)
        for e, kind in enumerate(self.kinds):
            if kind in (K.K_CHANNEL, K.K_CONSTRICTION, K.K_TESLA, K.K_PRESSURE_SRC):
                out[e] = 1
            elif kind == K.K_CHAMBER and chamber_mode == K.CHAMBER_PIN:
                out[e] = 1
        return out

    def initial_guess(self) -> np.ndarray:
        """Interior pressures at the mean of the fixed pressures, flows at zero."""
        fixed = [n.reservoir_pressure for n in self.network.nodes if n.is_reservoir]
        base = sum(fixed) / len(fixed) if fixed else 0.0
        candidates = list(fixed)
        for e, kind in enumerate(self.kinds):
            if kind == K.K_PRESSURE_SRC:
                candidates.append(base + self.pa[e])
        guess = sum(candidates) / len(candidates) if candidates else 0.0
        x0 = np.zeros(self.n_unknowns)
        x0[: self.n_interior] = guess
        return x0


def _effective_opening(element, opening_overrides):
    if opening_overrides and element.id in opening_overrides:
        return float(opening_overrides[element.id])
    return element.law.opening


def compile_network(network: Network, options: SolverOptions | None = None,
                    opening_overrides: dict | None = None,
                    source_overrides: dict | None = None) -> CompiledNetwork:
    options = options or SolverOptions()
    rho_ref = reference_density(network.fluid)
    mu = network.fluid.dynamic_viscosity
    gas = network.fluid.ideal_gas

    active = []
    blocked = []
    for el in network.elements:
        if isinstance(el.law, Constriction):
            if _effective_opening(el, opening_overrides) <= options.epsilon_open:
                blocked.append(el.id)
                continue
        active.append(el)

    touched: dict[str, bool] = {}
    for el in active:
        touched[el.from_node] = True
        touched[el.to_node] = True
    interior_ids = [n.id for n in network.nodes if not n.is_reservoir and n.id in touched]
    orphans = [n.id for n in network.nodes if not n.is_reservoir and n.id not in touched]
    node_pos = {nid: i for i, nid in enumerate(interior_ids)}
    reservoir_p = {n.id: n.reservoir_pressure for n in network.nodes if n.is_reservoir}

    n_e = len(active)
    kinds = np.zeros(n_e, dtype=np.int64)
    fidx = np.zeros(n_e, dtype=np.int64)
    tidx = np.zeros(n_e, dtype=np.int64)
    ffix = np.zeros(n_e)
    tfix = np.zeros(n_e)
    pa = np.zeros(n_e)
    pb = np.zeros(n_e)
    pc = np.zeros(n_e)

    for e, el in enumerate(active):
        fidx[e] = node_pos.get(el.from_node, -1)
        tidx[e] = node_pos.get(el.to_node, -1)
        if fidx[e] < 0:
            ffix[e] = reservoir_p[el.from_node]
        if tidx[e] < 0:
            tfix[e] = reservoir_p[el.to_node]
        law = el.law
        if isinstance(law, Channel):
            kinds[e] = K.K_CHANNEL
            pa[e] = law.resistance(mu)
            pb[e] = law.inertance(rho_ref) if options.include_inertance else 0.0
        elif isinstance(law, Constriction):
            kinds[e] = K.K_CONSTRICTION
            opening = _effective_opening(el, opening_overrides)
            pa[e] = law.quadratic_coefficient(rho_ref, opening)
            pb[e] = options.q_smooth
        elif isinstance(law, TeslaValve):
            kinds[e] = K.K_TESLA
            pa[e] = law.base_resistance
            pb[e] = law.base_resistance * law.diodicity
        elif isinstance(law, FlowSource):
            kinds[e] = K.K_FLOW_SRC
            pa[e] = law.q_set
        elif isinstance(law, PressureSource):
            kinds[e] = K.K_PRESSURE_SRC
            pa[e] = law.p_set
        elif isinstance(law, ComplianceChamber):
            kinds[e] = K.K_CHAMBER
            pa[e] = law.compliance
            pb[e] = law.rest_volume
            pc[e] = (1.0 / (gas.specific_gas_constant * gas.temperature)) if gas else 0.0
        else:  # pragma: no cover
            raise TypeError(f"unhandled law {law!r}")
        if source_overrides and el.id in source_overrides:
            if kinds[e] not in (K.K_FLOW_SRC, K.K_PRESSURE_SRC):
                raise ValueError(f"element {el.id!r} is not a source, cannot override")
            pa[e] = float(source_overrides[el.id])

    _check_topology(network, active, reservoir_p, kinds, pa)

    p_scale0 = max([1.0] + [abs(p) for p in reservoir_p.values()]
                   + [abs(pa[e]) for e in range(n_e) if kinds[e] == K.K_PRESSURE_SRC])
    r_char = _characteristic_resistance(kinds, pa, pb, p_scale0)
    p_scale = max(p_scale0,
                  max([0.0] + [abs(pa[e]) for e in range(n_e)
                               if kinds[e] == K.K_FLOW_SRC]) * r_char)
    q_scale = p_scale / r_char

    return CompiledNetwork(
        network=network, options=options,
        n_interior=len(interior_ids), interior_ids=interior_ids, node_pos=node_pos,
        element_ids=[el.id for el in active], blocked_ids=blocked,
        kinds=kinds, fidx=fidx, tidx=tidx, ffix=ffix, tfix=tfix,
        pa=pa, pb=pb, pc=pc,
        p_scale=p_scale, q_scale=q_scale, orphan_interior=orphans,
    )


def _characteristic_resistance(kinds, pa, pb, p_scale):
    logs = []
    for e in range(len(kinds)):
        if kinds[e] == K.K_CHANNEL or kinds[e] == K.K_TESLA:
            logs.append(math.log(pa[e]))
        elif kinds[e] == K.K_CONSTRICTION:
            # linear-equivalent resistance of the quadratic law at dp = p_scale
            logs.append(0.5 * math.log(pa[e] * p_scale))
    if not logs:
        return 1e9
    return math.exp(sum(logs) / len(logs))


def _check_topology(network, active, reservoir_p, kinds, pa):
    """Reject configurations with no steady solution before hitting LAPACK.

    Two cases: a live component with no pressure anchor (floating pressures)
    and a nonzero flow source whose endpoints have no return path.  All
    reservoirs are merged into one super-node because flow can always pass
    between fixed-pressure rails.
    """
    parent: dict[str, str] = {}

    def find(a):
        parent.setdefault(a, a)
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    GROUND = "\x00reservoirs"
    for nid in reservoir_p:
        union(nid, GROUND)
    for el in active:
        union(el.from_node, el.to_node)
    for el in active:
        if find(el.from_node) != find(GROUND):
            raise OpenCircuitError(
                f"element {el.id!r} is in a component with no reservoir node"
            )

    parent2: dict[str, str] = {}

    def find2(a):
        parent2.setdefault(a, a)
        while parent2[a] != a:
            parent2[a] = parent2[parent2[a]]
            a = parent2[a]
        return a

    for e, el in enumerate(active):
        if kinds[e] != K.K_FLOW_SRC or pa[e] == 0.0:
            continue
        parent2.clear()
        for nid in reservoir_p:
            parent2.setdefault(nid, GROUND)
            parent2[nid] = GROUND
        parent2.setdefault(GROUND, GROUND)
        for other in active:
            if other.id == el.id:
                continue
            a = find2(el_node_alias(other.from_node, reservoir_p, GROUND))
            b = find2(el_node_alias(other.to_node, reservoir_p, GROUND))
            if a != b:
                parent2[a] = b
        a = find2(el_node_alias(el.from_node, reservoir_p, GROUND))
        b = find2(el_node_alias(el.to_node, reservoir_p, GROUND))
        if a != b:
            raise OpenCircuitError(
                f"flow source {el.id!r} has no return path to close its loop"
            )


def el_node_alias(nid, reservoir_p, ground):
    return ground if nid in reservoir_p else nid
