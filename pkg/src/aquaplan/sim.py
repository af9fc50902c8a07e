"""Closed-loop simulation: controller -> hydraulics -> tanks -> quality.

``run`` advances a scenario step by step and returns an immutable
``SimulationTrace``; ``metrics`` reduces a trace to the comparison figures
and ``compare`` reports deltas between a baseline and a candidate run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .control import (Dynamics, MpcConfig, ReactiveConfig, ReactiveState,
                      lowpass, mpc_step, reactive_step)
from .errors import ComparisonError, ConfigError, SolverError, TraceError
from .exogenous import DemandProfile, EmissionsIntensitySeries
from .network import (ControlVector, NetworkModel, PlantParams,
                      build_example_plant, solve_flows, step_tanks)
from ._kernels import KW_PER_PSI_GPM
from .quality import WELL_MIXED, ChlorineState, TransportDelay, step_chlorine

MPC = "mpc"
REACTIVE = "reactive"


@dataclass(frozen=True)
class PlantState:
    """Full simulation state between steps."""

    x: np.ndarray                  # tank pressures, PSI
    y_c: float                     # tank 2 chlorine, mg/gal
    delay: TransportDelay
    filtered_u: ControlVector | None = None
    reactive: ReactiveState = field(default_factory=ReactiveState)
    yd_measured: float = float("nan")


@dataclass(frozen=True)
class Scenario:
    plant: PlantParams = field(default_factory=PlantParams)
    demand: DemandProfile = field(default_factory=DemandProfile)
    phi: EmissionsIntensitySeries | None = None
    controller: str = MPC
    mpc: MpcConfig = field(default_factory=MpcConfig)
    reactive: ReactiveConfig = field(default_factory=ReactiveConfig)
    dt: float = 2.5                # minutes
    hours: float = 120.0
    k_per_day: float = 0.5
    detention_min: float = 10.0
    dose: float = 22.0             # mg/gal at the treatment block
    min_chlorine: float = 6.0
    chlorine_mode: str = WELL_MIXED
    x0: tuple = (86.0, 86.0)
    yc0: float = 22.0
    safety_lo: float = 77.0        # PSI, trace violation flags
    safety_hi: float = 95.0

    def __post_init__(self):
        if self.controller not in (MPC, REACTIVE):
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.dt <= 0 or self.hours <= 0:
            raise ConfigError("dt and duration must be > 0")
        steps = self.hours * 60.0 / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("duration must be a whole number of steps")

    @property
    def n_steps(self) -> int:
        return int(round(self.hours * 60.0 / self.dt))

    def build_model(self) -> NetworkModel:
        return build_example_plant(self.plant)

    def dynamics(self, model: NetworkModel) -> Dynamics:
        return Dynamics(model=model, dt=self.dt,
                        k_per_day=self.k_per_day,
                        chlorine_mode=self.chlorine_mode)


@dataclass(frozen=True)
class SimulationTrace:
    controller: str
    dt: float                      # minutes
    yd_sp: float
    safety_lo: float
    safety_hi: float
    t_min: np.ndarray
    x: np.ndarray                  # (steps, n_tanks)
    u_raw: np.ndarray              # (steps, 5)
    u_f: np.ndarray                # (steps, 5), applied controls
    y_d: np.ndarray
    y_c: np.ndarray
    y_e: np.ndarray                # kg CO2 per hour
    power_kw: np.ndarray
    phi: np.ndarray
    f_d: np.ndarray
    f_treat: np.ndarray
    f_tank: np.ndarray             # (steps, n_tanks) net inflow, GPM
    feasible: np.ndarray           # bool
    fallback: np.ndarray           # bool
    violation: np.ndarray          # worst predicted bound overshoot, PSI
    x0: np.ndarray = None

    @property
    def n_steps(self) -> int:
        return self.t_min.shape[0]

    @property
    def hours(self) -> float:
        return self.n_steps * self.dt / 60.0

    def column_names(self):
        n_tanks = self.x.shape[1]
        names = ["step", "t_min"]
        names += [f"x{i + 1}" for i in range(n_tanks)]
        names += [f"u_{c}" for c in ("pb", "fp1", "fp2", "r1", "r2")]
        names += [f"uf_{c}" for c in ("pb", "fp1", "fp2", "r1", "r2")]
        names += ["y_d", "y_c", "y_e_kg_per_h", "power_kw", "phi", "f_d",
                  "f_treat"]
        names += [f"f_tank{i + 1}" for i in range(n_tanks)]
        names += ["feasible", "fallback", "violation"]
        return names

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names())
            for k in range(self.n_steps):
                row = [k, repr(float(self.t_min[k]))]
                row += [repr(float(v)) for v in self.x[k]]
                row += [repr(float(v)) for v in self.u_raw[k]]
                row += [repr(float(v)) for v in self.u_f[k]]
                row += [repr(float(self.y_d[k])), repr(float(self.y_c[k])),
                        repr(float(self.y_e[k])),
                        repr(float(self.power_kw[k])),
                        repr(float(self.phi[k])), repr(float(self.f_d[k])),
                        repr(float(self.f_treat[k]))]
                row += [repr(float(v)) for v in self.f_tank[k]]
                row += [int(self.feasible[k]), int(self.fallback[k]),
                        repr(float(self.violation[k]))]
                writer.writerow(row)


def read_trace_csv(path) -> dict:
    """Read a trace CSV back as a dict of numpy columns."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise TraceError(f"{path}: empty trace")
            rows = list(reader)
    except OSError as exc:
        raise TraceError(f"{path}: {exc}")
    if not rows:
        raise TraceError(f"{path}: trace has no data rows")
    data = np.array(rows, dtype=float)
    return {name: data[:, k] for k, name in enumerate(header)}


def run(scenario: Scenario) -> SimulationTrace:
    """Advance the closed loop over the scenario length."""
    model = scenario.build_model()
    dyn = scenario.dynamics(model)
    if scenario.phi is None:
        raise ConfigError("scenario needs an emissions intensity series")
    n = scenario.n_steps
    horizon = scenario.mpc.horizon
    needed_min = (n - 1) * scenario.dt + horizon * scenario.dt
    if scenario.phi.hours[-1] * 60.0 < needed_min:
        raise ConfigError(
            "phi series too short: covers "
            f"{scenario.phi.hours[-1]:.1f} h, need "
            f"{needed_min / 60.0:.1f} h")

    n_tanks = model.n_tanks
    x = np.array(scenario.x0, dtype=float)
    if x.shape != (n_tanks,):
        raise ConfigError(f"initial state needs {n_tanks} tank pressures")
    yc = float(scenario.yc0)
    delay = TransportDelay(scenario.detention_min, scenario.dt,
                           fill_flow=0.0,
                           fill_concentration=scenario.dose)
    chl_tank = dyn.chl_tank_index
    chl_node = dyn.chl_node_index
    treat_links = np.flatnonzero(model.link_type == _kernels.PIPE)
    treat_link = int(treat_links[0]) if treat_links.size else -1

    filtered = None
    rstate = ReactiveState()
    yd_measured = scenario.mpc.yd_sp if scenario.controller == MPC \
        else scenario.reactive.yd_sp

    cols = {
        "t_min": np.empty(n), "y_d": np.empty(n), "y_c": np.empty(n),
        "y_e": np.empty(n), "power_kw": np.empty(n), "phi": np.empty(n),
        "f_d": np.empty(n), "f_treat": np.empty(n),
        "violation": np.zeros(n),
    }
    x_t = np.empty((n, n_tanks))
    u_raw_t = np.empty((n, 5))
    u_f_t = np.empty((n, 5))
    f_tank_t = np.empty((n, n_tanks))
    feasible_t = np.ones(n, dtype=bool)
    fallback_t = np.zeros(n, dtype=bool)

    for k in range(n):
        t = k * scenario.dt
        f_d = scenario.demand.demand_at(t)
        phi = scenario.phi.phi_at(t)

        if scenario.controller == MPC:
            fd_arr = np.array(
                [scenario.demand.demand_at(t + j * scenario.dt)
                 for j in range(horizon)])
            phi_arr = np.array(
                [scenario.phi.phi_at(t + j * scenario.dt)
                 for j in range(horizon)])
            cin_arr = np.array(
                [delay.peek(j)[1] if j < len(delay) else scenario.dose
                 for j in range(horizon)])
            u_star, decision = mpc_step(dyn, x, yc, fd_arr, phi_arr,
                                        cin_arr, scenario.mpc)
            if filtered is None:
                filtered = u_star
            filtered = lowpass(filtered, u_star, scenario.mpc.alpha, model)
            u_apply = filtered
            feasible_t[k] = decision.feasible
            fallback_t[k] = not decision.feasible
            cols["violation"][k] = max(decision.worst_violation, 0.0)
        else:
            u_apply, rstate = reactive_step(rstate, x, yd_measured,
                                            scenario.reactive, scenario.dt,
                                            model)
            u_star = u_apply

        try:
            sol = solve_flows(model, x, u_apply, f_d)
        except SolverError as exc:
            raise SolverError(
                f"step {k} (t = {t} min): {exc}; x = {x.tolist()}, "
                f"u = {u_apply.as_array().tolist()}", node=exc.node)
        x_next = step_tanks(model, x, sol, scenario.dt)
        f_treat = float(sol.link_flows[treat_link]) if treat_link >= 0 \
            else 0.0
        _, c_out = delay.push_pop(f_treat, scenario.dose)
        inflow = _kernels._node_inflow(chl_node, model.link_i, model.link_j,
                                       sol.link_flows)
        outflow = _kernels._node_inflow(chl_node, model.link_j, model.link_i,
                                        -sol.link_flows)
        state = ChlorineState(y_c=yc, volume=x[chl_tank]
                              / model.capacitances[chl_tank])
        yc_next = step_chlorine(state, inflow, c_out, outflow, scenario.dt,
                                scenario.k_per_day,
                                scenario.chlorine_mode).y_c

        power = max(sol.total_power, 0.0)
        y_e = phi * power * KW_PER_PSI_GPM

        cols["t_min"][k] = t
        cols["y_d"][k] = sol.y_d
        cols["y_c"][k] = yc
        cols["y_e"][k] = y_e
        cols["power_kw"][k] = power * KW_PER_PSI_GPM
        cols["phi"][k] = phi
        cols["f_d"][k] = f_d
        cols["f_treat"][k] = f_treat
        x_t[k] = x
        u_raw_t[k] = u_star.as_array()
        u_f_t[k] = u_apply.as_array()
        f_tank_t[k] = _kernels._tank_net_inflows(
            model.tank_of_node, model.link_i, model.link_j,
            sol.link_flows, n_tanks)
        if scenario.controller == REACTIVE:
            worst = 0.0
            for v in [sol.y_d] + list(x_next):
                worst = max(worst, scenario.safety_lo - v,
                            v - scenario.safety_hi)
            cols["violation"][k] = worst
            feasible_t[k] = worst <= 0.0

        yd_measured = sol.y_d
        x = x_next
        yc = yc_next

    yd_sp = scenario.mpc.yd_sp if scenario.controller == MPC \
        else scenario.reactive.yd_sp
    return SimulationTrace(
        controller=scenario.controller, dt=scenario.dt, yd_sp=yd_sp,
        safety_lo=scenario.safety_lo, safety_hi=scenario.safety_hi,
        t_min=cols["t_min"], x=x_t, u_raw=u_raw_t, u_f=u_f_t,
        y_d=cols["y_d"], y_c=cols["y_c"], y_e=cols["y_e"],
        power_kw=cols["power_kw"], phi=cols["phi"], f_d=cols["f_d"],
        f_treat=cols["f_treat"], f_tank=f_tank_t,
        feasible=feasible_t, fallback=fallback_t,
        violation=cols["violation"],
        x0=np.array(scenario.x0, dtype=float))


@dataclass(frozen=True)
class Metrics:
    hours: float
    dt: float
    total_emissions_kg: float
    peak_emissions_kg_per_h: float
    yd_rms_error: float
    yd_min: float
    yd_max: float
    x_min: tuple
    x_max: tuple
    yc_min: float
    violation_steps: int

    def to_dict(self) -> dict:
        return {
            "hours": self.hours,
            "dt_min": self.dt,
            "total_emissions_kg": self.total_emissions_kg,
            "peak_emissions_kg_per_h": self.peak_emissions_kg_per_h,
            "yd_rms_error_psi": self.yd_rms_error,
            "yd_min_psi": self.yd_min,
            "yd_max_psi": self.yd_max,
            "x_min_psi": list(self.x_min),
            "x_max_psi": list(self.x_max),
            "yc_min_mg_per_gal": self.yc_min,
            "violation_steps": self.violation_steps,
        }


def metrics(trace: SimulationTrace, skip_hours: float = 0.0) -> Metrics:
    """Reduce a trace to the comparison figures.

    ``skip_hours`` optionally excludes the warm-up from the statistics
    (totals always use the skipped window too, unless it is excluded here).
    """
    if trace.n_steps == 0:
        raise ComparisonError("empty trace")
    start = int(round(skip_hours * 60.0 / trace.dt))
    if start >= trace.n_steps:
        raise ComparisonError("warm-up exclusion removes the whole trace")
    sl = slice(start, None)
    err = trace.yd_sp - trace.y_d[sl]
    return Metrics(
        hours=(trace.n_steps - start) * trace.dt / 60.0,
        dt=trace.dt,
        total_emissions_kg=float(np.sum(trace.y_e[sl]) * trace.dt / 60.0),
        peak_emissions_kg_per_h=float(np.max(trace.y_e[sl])),
        yd_rms_error=float(np.sqrt(np.mean(err ** 2))),
        yd_min=float(np.min(trace.y_d[sl])),
        yd_max=float(np.max(trace.y_d[sl])),
        x_min=tuple(float(v) for v in np.min(trace.x[sl], axis=0)),
        x_max=tuple(float(v) for v in np.max(trace.x[sl], axis=0)),
        yc_min=float(np.min(trace.y_c[sl])),
        violation_steps=int(np.sum(trace.violation[sl] > 0.0)),
    )


@dataclass(frozen=True)
class CompareReport:
    baseline: Metrics
    candidate: Metrics
    emissions_savings_pct: float
    peak_emissions_delta_kg_per_h: float
    yd_rms_delta_psi: float
    yc_min_baseline: float
    yc_min_candidate: float

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.to_dict(),
            "candidate": self.candidate.to_dict(),
            "emissions_savings_pct": self.emissions_savings_pct,
            "peak_emissions_delta_kg_per_h":
                self.peak_emissions_delta_kg_per_h,
            "yd_rms_delta_psi": self.yd_rms_delta_psi,
        }

    def pretty(self) -> str:
        b, c = self.baseline, self.candidate
        lines = [
            f"{'metric':<28}{'baseline':>14}{'candidate':>14}{'delta':>12}",
            f"{'total emissions (kg)':<28}{b.total_emissions_kg:>14.1f}"
            f"{c.total_emissions_kg:>14.1f}"
            f"{c.total_emissions_kg - b.total_emissions_kg:>12.1f}",
            f"{'peak emissions (kg/h)':<28}"
            f"{b.peak_emissions_kg_per_h:>14.2f}"
            f"{c.peak_emissions_kg_per_h:>14.2f}"
            f"{self.peak_emissions_delta_kg_per_h:>12.2f}",
            f"{'y_D RMS error (PSI)':<28}{b.yd_rms_error:>14.3f}"
            f"{c.yd_rms_error:>14.3f}{self.yd_rms_delta_psi:>12.3f}",
            f"{'chlorine minimum (mg/gal)':<28}{b.yc_min:>14.2f}"
            f"{c.yc_min:>14.2f}{c.yc_min - b.yc_min:>12.2f}",
            f"{'violation steps':<28}{b.violation_steps:>14d}"
            f"{c.violation_steps:>14d}"
            f"{c.violation_steps - b.violation_steps:>12d}",
            "",
            f"emissions savings: {self.emissions_savings_pct:.1f}%",
        ]
        return "\n".join(lines)


def compare(baseline: Metrics, candidate: Metrics) -> CompareReport:
    """Side-by-side deltas; savings are relative to the baseline."""
    if abs(baseline.hours - candidate.hours) > 1e-9 \
            or abs(baseline.dt - candidate.dt) > 1e-12:
        raise ComparisonError("metrics cover different scenario lengths")
    if baseline.total_emissions_kg > 0:
        savings = 100.0 * (baseline.total_emissions_kg
                           - candidate.total_emissions_kg) \
            / baseline.total_emissions_kg
    else:
        savings = 0.0
    return CompareReport(
        baseline=baseline, candidate=candidate,
        emissions_savings_pct=float(savings),
        peak_emissions_delta_kg_per_h=float(
            candidate.peak_emissions_kg_per_h
            - baseline.peak_emissions_kg_per_h),
        yd_rms_delta_psi=float(candidate.yd_rms_error
                               - baseline.yd_rms_error),
        yc_min_baseline=baseline.yc_min,
        yc_min_candidate=candidate.yc_min,
    )
