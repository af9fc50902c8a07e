"""Controllers: grid-search MPC with rollout prediction, and the reactive
tank-cycling + PI booster baseline.

The MPC enumerates the full Cartesian mesh over the five control dimensions,
rolls each candidate out over the horizon with the control held constant
(move blocking), rejects candidates that violate the tank or pipe pressure
bounds, and picks the lowest-cost survivor.  Ties break toward the lowest
lexicographic mesh index.  When no candidate is feasible the point with the
smallest worst violation is returned and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import ConfigError
from .network import ControlVector, NetworkModel, N_CONTROLS
from .quality import UNSCALED, WELL_MIXED, k_per_minute


@dataclass(frozen=True)
class OutputVector:
    """Controller-visible outputs at one step."""

    y_c_err: float          # chlorine tracking error, mg/gal
    y_d_err: float          # distribution pressure tracking error, PSI
    y_e: float              # emissions rate, kg CO2 per hour
    y_p: np.ndarray         # monitored pipe pressures, PSI

    def __post_init__(self):
        if self.y_e < 0:
            raise ConfigError("emissions rate must be >= 0")


@dataclass(frozen=True)
class MpcConfig:
    lam_c: float = 1.0           # 1 / (1 mg/gal)^2
    lam_d: float = 0.16          # 1 / (2.5 PSI)^2
    lam_e: float = 4.0e-4        # 1 / (50 kg/h)^2
    yd_sp: float = 86.0          # PSI
    yc_sp: float = 22.0          # mg/gal
    horizon: int = 2             # steps
    resolution: tuple = (5, 5, 5, 5, 5)
    alpha: float = 0.6           # low-pass coefficient, (0, 1]
    x_lo: float = 78.0           # tank pressure bounds, PSI
    x_hi: float = 94.0
    yp_lo: float = 78.0          # monitored pipe pressure bounds, PSI
    yp_hi: float = 94.0

    def __post_init__(self):
        if min(self.lam_c, self.lam_d, self.lam_e) < 0:
            raise ConfigError("cost weights must be >= 0")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        res = self.resolution
        if isinstance(res, int):
            res = (res,) * N_CONTROLS
        res = tuple(int(r) for r in res)
        if len(res) != N_CONTROLS or min(res) < 2:
            raise ConfigError("mesh resolution must be >= 2 per dimension")
        object.__setattr__(self, "resolution", res)
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("low-pass alpha must be in (0, 1]")
        if self.x_lo >= self.x_hi or self.yp_lo >= self.yp_hi:
            raise ConfigError("pressure bounds must be ordered")


@dataclass(frozen=True)
class RolloutResult:
    """Per-step outputs of one constant-control rollout."""

    y_c_err: np.ndarray
    y_d_err: np.ndarray
    y_d: np.ndarray
    y_e: np.ndarray
    y_p: np.ndarray        # (N, n_monitored)
    x: np.ndarray          # (N, n_tanks), post-step tank pressures
    cost: float
    feasible: bool
    worst_violation: float


@dataclass(frozen=True)
class MpcDecision:
    index: int
    cost: float
    feasible: bool
    worst_violation: float


@dataclass(frozen=True)
class Dynamics:
    """Everything the rollout needs besides the instantaneous inputs."""

    model: NetworkModel
    dt: float                    # minutes
    chlorine_tank: str = "tank2"
    k_per_day: float = 0.5
    chlorine_mode: str = WELL_MIXED

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.chlorine_mode not in (WELL_MIXED, UNSCALED):
            raise ConfigError(f"unknown chlorine mode {self.chlorine_mode!r}")

    @property
    def chl_tank_index(self) -> int:
        return self.model.tank_index(self.chlorine_tank)

    @property
    def chl_node_index(self) -> int:
        return self.model.node_index[self.chlorine_tank]


def stage_cost(out: OutputVector, cfg: MpcConfig) -> float:
    """lam_C*y_C_err^2 + lam_D*y_D_err^2 + lam_E*y_E^2."""
    return (cfg.lam_c * out.y_c_err ** 2
            + cfg.lam_d * out.y_d_err ** 2
            + cfg.lam_e * out.y_e ** 2)


def _kernel_args(dyn: Dynamics, cfg: MpcConfig):
    m = dyn.model
    n_tanks = m.n_tanks
    return dict(
        junc_of_node=m.junc_of_node, fixed_p=m.fixed_p,
        tank_of_node=m.tank_of_node,
        link_type=m.link_type, link_i=m.link_i, link_j=m.link_j,
        link_param=m.link_param, link_ctrl=m.link_ctrl,
        ppump_col=m.ppump_col,
        n_unknown=m.n_unknown, demand_node=m.demand_idx,
        output_node=m.output_idx, monitored=m.monitored_idx,
        dt=dyn.dt, cap=m.capacitances,
        chl_tank=dyn.chl_tank_index, chl_node=dyn.chl_node_index,
        k_per_min=k_per_minute(dyn.k_per_day),
        literal=dyn.chlorine_mode == UNSCALED,
        yd_sp=cfg.yd_sp, yc_sp=cfg.yc_sp,
        lam_c=cfg.lam_c, lam_d=cfg.lam_d, lam_e=cfg.lam_e,
        x_lo=np.full(n_tanks, cfg.x_lo), x_hi=np.full(n_tanks, cfg.x_hi),
        yp_lo=cfg.yp_lo, yp_hi=cfg.yp_hi,
    )


def predict(dyn: Dynamics, x, y_c: float, u, fd_arr, phi_arr, cin_arr,
            cfg: MpcConfig) -> RolloutResult:
    """Roll ``u`` out over the horizon defined by the input arrays."""
    fd_arr = np.asarray(fd_arr, dtype=float)
    phi_arr = np.asarray(phi_arr, dtype=float)
    cin_arr = np.asarray(cin_arr, dtype=float)
    n = fd_arr.shape[0]
    if n < 1 or phi_arr.shape[0] != n or cin_arr.shape[0] != n:
        raise ConfigError("rollout input arrays must share length >= 1")
    u_arr = u.as_array() if isinstance(u, ControlVector) else np.asarray(
        u, dtype=float)
    args = _kernel_args(dyn, cfg)

    x_cur = np.asarray(x, dtype=float).copy()
    yc = float(y_c)
    total = 0.0
    worst = 0.0
    yd_t = np.empty(n)
    ye_t = np.empty(n)
    yc_t = np.empty(n)
    yp_t = np.empty((n, args["monitored"].shape[0]))
    x_t = np.empty((n, x_cur.shape[0]))
    for j in range(n):
        yc_t[j] = yc
        cost, yd, ye, power, viol, x_cur, yc, p, flows = \
            _kernels._rollout_step(
                args["junc_of_node"], args["fixed_p"], args["tank_of_node"],
                args["link_type"], args["link_i"], args["link_j"],
                args["link_param"], args["link_ctrl"], args["ppump_col"],
                args["n_unknown"], args["demand_node"], args["output_node"],
                args["monitored"],
                x_cur, yc, u_arr, fd_arr[j], phi_arr[j], cin_arr[j],
                args["dt"], args["cap"], args["chl_tank"], args["chl_node"],
                args["k_per_min"], args["literal"],
                args["yd_sp"], args["yc_sp"],
                args["lam_c"], args["lam_d"], args["lam_e"],
                args["x_lo"], args["x_hi"], args["yp_lo"], args["yp_hi"])
        total += cost
        if viol > worst:
            worst = viol
        yd_t[j] = yd
        ye_t[j] = ye
        yp_t[j] = p[args["monitored"]]
        x_t[j] = x_cur
    return RolloutResult(
        y_c_err=cfg.yc_sp - yc_t,
        y_d_err=cfg.yd_sp - yd_t,
        y_d=yd_t, y_e=ye_t, y_p=yp_t, x=x_t,
        cost=float(total), feasible=bool(worst <= 0.0),
        worst_violation=float(worst))


def build_mesh(model: NetworkModel, cfg: MpcConfig) -> np.ndarray:
    """Full Cartesian mesh over the control space, lexicographic in the
    per-dimension indices (dimension 0 slowest)."""
    axes = [np.linspace(model.control_lower[d], model.control_upper[d],
                        cfg.resolution[d])
            for d in range(N_CONTROLS)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def select_mesh_point(costs: np.ndarray, violations: np.ndarray
                      ) -> MpcDecision:
    """Lowest-cost feasible point; minimal-violation fallback otherwise.

    First index wins ties, matching lexicographic mesh order.
    """
    feasible = violations <= 0.0
    if feasible.any():
        candidates = np.flatnonzero(feasible)
        best = candidates[int(np.argmin(costs[feasible]))]
        return MpcDecision(index=int(best), cost=float(costs[best]),
                           feasible=True,
                           worst_violation=float(violations[best]))
    best = int(np.argmin(violations))
    return MpcDecision(index=best, cost=float(costs[best]), feasible=False,
                       worst_violation=float(violations[best]))


def mpc_step(dyn: Dynamics, x, y_c: float, fd_arr, phi_arr, cin_arr,
             cfg: MpcConfig) -> tuple[ControlVector, MpcDecision]:
    """One receding-horizon step: mesh search over constant controls."""
    mesh = build_mesh(dyn.model, cfg)
    args = _kernel_args(dyn, cfg)
    fd_arr = np.asarray(fd_arr, dtype=float)
    phi_arr = np.asarray(phi_arr, dtype=float)
    cin_arr = np.asarray(cin_arr, dtype=float)
    if fd_arr.shape[0] != cfg.horizon:
        raise ConfigError("exogenous arrays must cover the horizon")
    costs, viols = _kernels._mesh_rollout(
        mesh,
        args["junc_of_node"], args["fixed_p"], args["tank_of_node"],
        args["link_type"], args["link_i"], args["link_j"],
        args["link_param"], args["link_ctrl"], args["ppump_col"],
        args["n_unknown"], args["demand_node"], args["output_node"],
        args["monitored"],
        np.asarray(x, dtype=float), float(y_c), fd_arr, phi_arr, cin_arr,
        args["dt"], args["cap"], args["chl_tank"], args["chl_node"],
        args["k_per_min"], args["literal"],
        args["yd_sp"], args["yc_sp"],
        args["lam_c"], args["lam_d"], args["lam_e"],
        args["x_lo"], args["x_hi"], args["yp_lo"], args["yp_hi"])
    decision = select_mesh_point(costs, viols)
    return ControlVector.from_array(mesh[decision.index]), decision


def lowpass(prev_filtered: ControlVector, u_star: ControlVector,
            alpha: float, model: NetworkModel) -> ControlVector:
    """First-order low-pass per dimension, clamped to the control bounds."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must be in (0, 1]")
    mixed = alpha * u_star.as_array() + (1.0 - alpha) \
        * prev_filtered.as_array()
    return ControlVector.from_array(model.clip_controls(mixed))


# ---------------------------------------------------------------------------
# reactive baseline

FILLING = "filling"
DRAINING = "draining"


@dataclass(frozen=True)
class ReactiveConfig:
    low_threshold: float = 79.0    # PSI, switch to filling at or below
    high_threshold: float = 93.0   # PSI, switch to draining at or above
    k_p: float = 0.5               # PSI per PSI
    k_i: float = 0.05              # PSI per (PSI*min)
    pump_flow: float = 1200.0      # GPM while filling (both tanks)
    valve_open_frac: float = 1.0   # fraction of max conductance while draining
    yd_sp: float = 86.0            # PSI

    def __post_init__(self):
        if self.low_threshold >= self.high_threshold:
            raise ConfigError("hysteresis thresholds must be ordered")
        if self.k_p < 0 or self.k_i < 0:
            raise ConfigError("PI gains must be >= 0")
        if not 0.0 < self.valve_open_frac <= 1.0:
            raise ConfigError("valve_open_frac must be in (0, 1]")


@dataclass(frozen=True)
class ReactiveState:
    modes: tuple = (FILLING, FILLING)
    integrator: float = 0.0        # PSI*min


def reactive_step(state: ReactiveState, x, yd_measured: float,
                  cfg: ReactiveConfig, dt: float, model: NetworkModel
                  ) -> tuple[ControlVector, ReactiveState]:
    """Hysteresis tank cycling plus PI booster.

    Each tank fills at a fixed pump flow until the high threshold, then
    drains through its fully-open valve until the low threshold.  The
    booster tracks the pressure setpoint with a clamped-integrator PI law.
    """
    modes = []
    for t, mode in enumerate(state.modes):
        if mode == FILLING and x[t] >= cfg.high_threshold:
            mode = DRAINING
        elif mode == DRAINING and x[t] <= cfg.low_threshold:
            mode = FILLING
        modes.append(mode)

    err = cfg.yd_sp - yd_measured
    pb_lo = model.control_lower[0]
    pb_hi = model.control_upper[0]
    integ = state.integrator + err * dt
    if cfg.k_i > 0:  # anti-windup: the integral term alone spans the range
        i_cap = pb_hi / cfg.k_i
        integ = min(max(integ, -i_cap), i_cap)
    p_b = min(max(cfg.k_p * err + cfg.k_i * integ, pb_lo), pb_hi)

    f_p1 = model.control_upper[1] if modes[0] == FILLING else 0.0
    f_p2 = model.control_upper[2] if modes[1] == FILLING else 0.0
    f_p1 = min(f_p1, cfg.pump_flow)
    f_p2 = min(f_p2, cfg.pump_flow)
    r_1 = cfg.valve_open_frac * model.control_upper[3] \
        if modes[0] == DRAINING else 0.0
    r_2 = cfg.valve_open_frac * model.control_upper[4] \
        if modes[1] == DRAINING else 0.0

    u = ControlVector(p_b=p_b, f_p1=f_p1, f_p2=f_p2, r_1=r_1, r_2=r_2)
    return u, ReactiveState(modes=tuple(modes), integrator=integ)
