"""Plant hydraulic topology and the nodal flow solver.

A plant is a graph of nodes (junctions, fixed-pressure nodes, tanks) joined
by links (pipes, actuated valves, pressure pumps, flow pumps).  One node
extracts the distribution demand and one node is the distribution-pressure
output.  ``solve_flows`` assembles and solves the linear continuity system at
a single time step; ``step_tanks`` advances tank pressures with the solved
flows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import KW_PER_PSI_GPM
from .errors import ConfigError, SolverError

# Control vector layout (indices into ControlVector.as_array()).
CTRL_PB = 0     # booster pressure rise, PSI
CTRL_FP1 = 1    # tank 1 inlet pump flow, GPM
CTRL_FP2 = 2    # tank 2 inlet pump flow, GPM
CTRL_R1 = 3     # tank 1 outlet valve conductance, GPM/PSI
CTRL_R2 = 4     # tank 2 outlet valve conductance, GPM/PSI
N_CONTROLS = 5

CONTROL_NAMES = ("p_b", "f_p1", "f_p2", "r_1", "r_2")


@dataclass(frozen=True)
class Pipe:
    i: str
    j: str
    resistance: float  # PSI per GPM


@dataclass(frozen=True)
class Valve:
    i: str
    j: str
    ctrl: int          # index into the control vector (conductance)
    max_conductance: float  # GPM per PSI


@dataclass(frozen=True)
class PressurePump:
    i: str
    j: str
    dp: float | None = None  # fixed pressure rise, PSI
    ctrl: int | None = None  # or index into the control vector


@dataclass(frozen=True)
class FlowPump:
    i: str
    j: str
    ctrl: int  # index into the control vector (flow, GPM)


@dataclass(frozen=True)
class Tank:
    node: str
    capacitance: float  # PSI per gallon


@dataclass(frozen=True)
class ControlVector:
    """u(k): booster pressure, two inlet pump flows, two valve conductances."""

    p_b: float
    f_p1: float
    f_p2: float
    r_1: float
    r_2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_b, self.f_p1, self.f_p2, self.r_1, self.r_2])

    @staticmethod
    def from_array(u) -> "ControlVector":
        return ControlVector(*(float(v) for v in u))


class NetworkModel:
    """Immutable plant topology plus its flattened solver arrays.

    ``fixed_nodes`` maps node name -> prescribed pressure (the reservoir is
    the usual member, at the reference pressure).  ``monitored_nodes`` are the
    junctions whose pressures feed the controller's pipe-pressure bounds.
    """

    def __init__(self, *, junctions, fixed_nodes, tanks, links,
                 demand_node, output_node, monitored_nodes,
                 control_lower, control_upper):
        self.junctions = tuple(junctions)
        self.fixed_nodes = dict(fixed_nodes)
        self.tanks = tuple(tanks)
        self.links = tuple(links)
        self.demand_node = demand_node
        self.output_node = output_node
        self.monitored_nodes = tuple(monitored_nodes)
        self.control_lower = np.asarray(control_lower, dtype=float)
        self.control_upper = np.asarray(control_upper, dtype=float)
        self._validate()
        self._flatten()

    # -- construction ------------------------------------------------------

    def _validate(self):
        names = list(self.junctions) + list(self.fixed_nodes)
        names += [t.node for t in self.tanks]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate node names in network")
        self.node_names = tuple(names)
        known = set(names)
        for link in self.links:
            for end in (link.i, link.j):
                if end not in known:
                    raise ConfigError(f"link references unknown node {end!r}")
        for t in self.tanks:
            if t.capacitance <= 0:
                raise ConfigError(f"tank {t.node!r}: capacitance must be > 0")
        for link in self.links:
            if isinstance(link, Pipe) and link.resistance <= 0:
                raise ConfigError(
                    f"pipe {link.i}->{link.j}: resistance must be > 0")
            if isinstance(link, Valve) and link.max_conductance <= 0:
                raise ConfigError(
                    f"valve {link.i}->{link.j}: max conductance must be > 0")
        if self.demand_node not in self.junctions:
            raise ConfigError("demand node must be a junction")
        if self.output_node not in known:
            raise ConfigError("output node missing from network")
        for m in self.monitored_nodes:
            if m not in self.junctions:
                raise ConfigError(f"monitored node {m!r} must be a junction")
        if (self.control_lower.shape != (N_CONTROLS,)
                or self.control_upper.shape != (N_CONTROLS,)):
            raise ConfigError("control bounds must have 5 entries")
        if np.any(self.control_lower < 0) or np.any(
                self.control_upper < self.control_lower):
            raise ConfigError("control bounds must satisfy 0 <= lower <= upper")
        # connectivity (treat every link as an undirected edge)
        adj = {n: set() for n in self.node_names}
        for link in self.links:
            adj[link.i].add(link.j)
            adj[link.j].add(link.i)
        seen = {self.node_names[0]}
        stack = [self.node_names[0]]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != set(self.node_names):
            missing = sorted(set(self.node_names) - seen)
            raise ConfigError(f"network is not connected: {missing}")

    def _flatten(self):
        index = {n: k for k, n in enumerate(self.node_names)}
        self.node_index = index
        n_nodes = len(self.node_names)
        junc_of_node = np.full(n_nodes, -1, dtype=np.int64)
        for k, n in enumerate(self.junctions):
            junc_of_node[index[n]] = k
        fixed_p = np.zeros(n_nodes)
        for n, p in self.fixed_nodes.items():
            fixed_p[index[n]] = p
        tank_of_node = np.full(n_nodes, -1, dtype=np.int64)
        for k, t in enumerate(self.tanks):
            tank_of_node[index[t.node]] = k

        n_links = len(self.links)
        link_type = np.zeros(n_links, dtype=np.int64)
        link_i = np.zeros(n_links, dtype=np.int64)
        link_j = np.zeros(n_links, dtype=np.int64)
        link_param = np.zeros(n_links)
        link_ctrl = np.full(n_links, -1, dtype=np.int64)
        ppump_col = np.full(n_links, -1, dtype=np.int64)
        n_pp = 0
        for l, link in enumerate(self.links):
            link_i[l] = index[link.i]
            link_j[l] = index[link.j]
            if isinstance(link, Pipe):
                link_type[l] = _kernels.PIPE
                link_param[l] = link.resistance
            elif isinstance(link, Valve):
                link_type[l] = _kernels.VALVE
                link_param[l] = link.max_conductance
                link_ctrl[l] = link.ctrl
            elif isinstance(link, PressurePump):
                link_type[l] = _kernels.PRESSURE_PUMP
                if link.ctrl is None:
                    if link.dp is None:
                        raise ConfigError(
                            "pressure pump needs a fixed dp or a control index")
                    link_param[l] = link.dp
                else:
                    link_ctrl[l] = link.ctrl
                ppump_col[l] = len(self.junctions) + n_pp
                n_pp += 1
            elif isinstance(link, FlowPump):
                link_type[l] = _kernels.FLOW_PUMP
                link_ctrl[l] = link.ctrl
            else:
                raise ConfigError(f"unknown link type {type(link).__name__}")

        self.junc_of_node = junc_of_node
        self.fixed_p = fixed_p
        self.tank_of_node = tank_of_node
        self.link_type = link_type
        self.link_i = link_i
        self.link_j = link_j
        self.link_param = link_param
        self.link_ctrl = link_ctrl
        self.ppump_col = ppump_col
        self.n_unknown = len(self.junctions) + n_pp
        self.demand_idx = index[self.demand_node]
        self.output_idx = index[self.output_node]
        self.monitored_idx = np.array(
            [index[m] for m in self.monitored_nodes], dtype=np.int64)
        self.capacitances = np.array([t.capacitance for t in self.tanks])

    # -- queries -----------------------------------------------------------

    @property
    def n_tanks(self) -> int:
        return len(self.tanks)

    def tank_index(self, node: str) -> int:
        for k, t in enumerate(self.tanks):
            if t.node == node:
                return k
        raise KeyError(node)

    def clip_controls(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.control_lower, self.control_upper)

    def main_path_resistance(self) -> float:
        """Total pipe resistance in series on the supply path (used by the
        closed-form pressure oracle)."""
        return sum(l.resistance for l in self.links if isinstance(l, Pipe))


@dataclass(frozen=True)
class HydraulicSolution:
    """Snapshot of all node pressures and signed link flows at one step."""

    node_names: tuple
    node_pressures: np.ndarray   # PSI, indexed like node_names
    link_flows: np.ndarray       # GPM, signed, indexed like model.links
    y_d: float                   # distribution pressure, PSI
    total_power: float           # PSI*GPM over all pumps

    def pressure(self, node: str) -> float:
        return float(self.node_pressures[self.node_names.index(node)])


def solve_flows(model: NetworkModel, x, u: ControlVector,
                f_demand: float) -> HydraulicSolution:
    """Solve the continuity system for one step.

    ``x`` holds the tank pressures, ``u`` the control vector, ``f_demand``
    the demand extraction (GPM) at the demand node.
    """
    if f_demand < 0:
        raise ConfigError("demand must be >= 0")
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_tanks,):
        raise ConfigError(
            f"expected {model.n_tanks} tank pressures, got shape {x.shape}")
    u_arr = u.as_array() if isinstance(u, ControlVector) else np.asarray(
        u, dtype=float)
    try:
        p, flows, power = _kernels._solve_nodal(
            model.junc_of_node, model.fixed_p, model.tank_of_node,
            model.link_type, model.link_i, model.link_j,
            model.link_param, model.link_ctrl, model.ppump_col,
            model.n_unknown, model.demand_idx, x, u_arr, float(f_demand))
    except np.linalg.LinAlgError:
        raise SolverError(
            f"singular nodal system: {_isolated_node(model, u_arr)}",
            node=_isolated_node(model, u_arr))
    except Exception as exc:  # numba wraps LinAlgError differently
        if "Matrix is singular" in str(exc) or "singular" in str(exc).lower():
            node = _isolated_node(model, u_arr)
            raise SolverError(f"singular nodal system: {node}", node=node)
        raise
    return HydraulicSolution(
        node_names=model.node_names,
        node_pressures=p,
        link_flows=flows,
        y_d=float(p[model.output_idx]),
        total_power=float(power),
    )


def _isolated_node(model: NetworkModel, u: np.ndarray) -> str:
    """Best-effort identification of the junction that isolates the system."""
    degree = {n: 0.0 for n in model.junctions}
    for link in model.links:
        w = 0.0
        if isinstance(link, Pipe):
            w = 1.0 / link.resistance
        elif isinstance(link, Valve):
            w = min(max(u[link.ctrl], 0.0), link.max_conductance)
        elif isinstance(link, PressurePump):
            w = 1.0
        for end in (link.i, link.j):
            if end in degree:
                degree[end] += w
        if isinstance(link, FlowPump):
            # a prescribed flow does not pin the junction pressure
            pass
    worst = min(degree, key=degree.get)
    return worst


def continuity_residuals(model: NetworkModel, sol: HydraulicSolution,
                         u, f_demand: float) -> np.ndarray:
    """Signed flow imbalance at each junction, relative to the largest
    incident flow magnitude (used by tests and trace audits)."""
    net = np.zeros(len(model.junctions))
    scale = np.zeros(len(model.junctions))
    for l, _ in enumerate(model.links):
        f = sol.link_flows[l]
        ri = model.junc_of_node[model.link_i[l]]
        rj = model.junc_of_node[model.link_j[l]]
        if rj >= 0:
            net[rj] += f
            scale[rj] = max(scale[rj], abs(f))
        if ri >= 0:
            net[ri] -= f
            scale[ri] = max(scale[ri], abs(f))
    rd = model.junc_of_node[model.demand_idx]
    net[rd] -= f_demand
    scale[rd] = max(scale[rd], abs(f_demand))
    return net / np.where(scale > 0, scale, 1.0)


def step_tanks(model: NetworkModel, x, sol: HydraulicSolution,
               dt: float) -> np.ndarray:
    """Advance tank pressures: x_j(k+1) = x_j(k) + C_j * dt * net inflow."""
    if dt <= 0:
        raise ConfigError("dt must be > 0")
    x = np.asarray(x, dtype=float)
    net = _kernels._tank_net_inflows(
        model.tank_of_node, model.link_i, model.link_j, sol.link_flows,
        model.n_tanks)
    return x + model.capacitances * dt * net


def pump_power(sol: HydraulicSolution) -> tuple[float, float]:
    """Total pump power as (PSI*GPM, kW)."""
    p = sol.total_power
    return p, p * KW_PER_PSI_GPM


def closed_form_yD(x_2: float, u: ControlVector, f_demand: float,
                   p_s: float, r: float) -> float:
    """Closed-form distribution pressure for the example plant.

    Test oracle only: evaluates
    (P_s + P_b - R*(F_D + F_p2 - r_2*x_2)) / (1 + r_2*R)
    where ``r`` is the series resistance of the supply path.
    """
    r2 = u.r_2
    denom = 1.0 + r2 * r
    if denom <= 0:
        raise ConfigError("1 + r_2*R must be > 0")
    return (p_s + u.p_b - r * (f_demand + u.f_p2 - r2 * x_2)) / denom


def hazen_williams_resistance(diameter_in: float = 12.0,
                              length_ft: float = 100.0,
                              roughness: float = 130.0,
                              flow_gpm: float = 3500.0) -> float:
    """Linearized pipe resistance (PSI per GPM) at an operating point.

    Hazen-Williams head loss h_ft = 10.44 L Q^1.852 / (C^1.852 d^4.87)
    with Q in GPM, d in inches, L in feet; the resistance is the local slope
    d(dP)/dQ at ``flow_gpm``.
    """
    if min(diameter_in, length_ft, roughness, flow_gpm) <= 0:
        raise ConfigError("Hazen-Williams parameters must be positive")
    h_ft = (10.44 * length_ft * flow_gpm ** 1.852
            / (roughness ** 1.852 * diameter_in ** 4.87))
    dp_psi = 0.4335 * h_ft
    return 1.852 * dp_psi / flow_gpm


@dataclass(frozen=True)
class PlantParams:
    """Element parameters and control bounds for the example plant."""

    r_treat: float = field(default_factory=hazen_williams_resistance)
    r_dist: float = field(default_factory=hazen_williams_resistance)
    c_1: float = 6.944444444444445e-05   # PSI/gal, 4 h time constant at r1_max
    c_2: float = 1.3888888888888889e-04  # PSI/gal, 4 h time constant at r2_max
    p_s: float = 60.0                    # source pump pressure, PSI
    reservoir_pressure: float = 0.0
    p_b_min: float = 20.0
    p_b_max: float = 40.0
    f_p1_max: float = 2000.0
    f_p2_max: float = 2000.0
    r_1_max: float = 60.0
    r_2_max: float = 30.0


def build_example_plant(params: PlantParams | None = None) -> NetworkModel:
    """The two-tank example plant.

    Main path: reservoir -> source pump (P_s) -> intake -> treatment pipe ->
    treated -> booster (P_b) -> boosted -> distribution pipe -> distribution
    node, where demand is extracted and y_D is measured.  Tank 1 tees at the
    intake node (inlet pump F_p1, outlet valve r_1); tank 2 tees at the
    distribution node (inlet pump F_p2, outlet valve r_2).
    """
    params = params or PlantParams()
    positives = {
        "r_treat": params.r_treat, "r_dist": params.r_dist,
        "c_1": params.c_1, "c_2": params.c_2, "p_s": params.p_s,
        "f_p1_max": params.f_p1_max, "f_p2_max": params.f_p2_max,
        "r_1_max": params.r_1_max, "r_2_max": params.r_2_max,
        "p_b_max": params.p_b_max,
    }
    for name, value in positives.items():
        if value <= 0:
            raise ConfigError(f"plant parameter {name} must be > 0")
    if params.p_b_min < 0 or params.p_b_min > params.p_b_max:
        raise ConfigError("booster bounds must satisfy 0 <= min <= max")

    return NetworkModel(
        junctions=("intake", "treated", "boosted", "distribution"),
        fixed_nodes={"reservoir": params.reservoir_pressure},
        tanks=(Tank("tank1", params.c_1), Tank("tank2", params.c_2)),
        links=(
            PressurePump("reservoir", "intake", dp=params.p_s),
            Pipe("intake", "treated", params.r_treat),
            PressurePump("treated", "boosted", ctrl=CTRL_PB),
            Pipe("boosted", "distribution", params.r_dist),
            FlowPump("intake", "tank1", ctrl=CTRL_FP1),
            Valve("tank1", "intake", ctrl=CTRL_R1,
                  max_conductance=params.r_1_max),
            FlowPump("distribution", "tank2", ctrl=CTRL_FP2),
            Valve("tank2", "distribution", ctrl=CTRL_R2,
                  max_conductance=params.r_2_max),
        ),
        demand_node="distribution",
        output_node="distribution",
        monitored_nodes=("distribution",),
        control_lower=(params.p_b_min, 0.0, 0.0, 0.0, 0.0),
        control_upper=(params.p_b_max, params.f_p1_max, params.f_p2_max,
                       params.r_1_max, params.r_2_max),
    )
