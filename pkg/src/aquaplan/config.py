"""Scenario configuration files.

Flat INI-style text with the sections below; unknown sections or keys are
rejected, missing keys fall back to package defaults (logged once).  The
``--dump-effective-config`` CLI flag emits the fully-resolved file, which
re-runs to an identical trace.
"""

from __future__ import annotations

import configparser
import logging
import math
import os

from .control import MpcConfig, ReactiveConfig
from .errors import ConfigError
from .exogenous import (DemandProfile, fit_emissions_coefficients,
                        intensity_series, load_demand_table, load_mix_csv,
                        synthetic_mix)
from .network import PlantParams
from .sim import Scenario

log = logging.getLogger("aquaplan.config")

DEFAULTS = {
    "plant": {
        "r_treat": "",            # empty -> Hazen-Williams linearization
        "r_dist": "",
        "c_1": "6.944444444444445e-05",
        "c_2": "1.3888888888888889e-04",
        "p_s": "60.0",
        "reservoir_pressure": "0.0",
        "p_b_min": "20.0",
        "p_b_max": "40.0",
        "f_p1_max": "2000.0",
        "f_p2_max": "2000.0",
        "r_1_max": "60.0",
        "r_2_max": "30.0",
    },
    "quality": {
        "k_per_day": "0.5",
        "detention_min": "10.0",
        "dose": "22.0",
        "min_chlorine": "6.0",
        "mode": "well_mixed",
    },
    "demand": {
        "mean_gpm": "3472.2222222222222",   # 5 Mgal/day
        "amplitude": "0.3",
        "peak_hour": "18.0",
        "noise": "0.0",
        "table": "",
    },
    "emissions": {
        "source": "synthetic",
        "csv": "",
        "ghg_noise": "0.0",
    },
    "controller.mpc": {
        "lam_c": "1.0",
        "lam_d": "0.16",
        "lam_e": "4.0e-4",
        "yd_sp": "86.0",
        "yc_sp": "22.0",
        "horizon": "2",
        "resolution": "5",
        "alpha": "0.6",
        "x_lo": "78.0",
        "x_hi": "94.0",
        "yp_lo": "78.0",
        "yp_hi": "94.0",
    },
    "controller.reactive": {
        "low_threshold": "79.0",
        "high_threshold": "93.0",
        "k_p": "0.5",
        "k_i": "0.05",
        "pump_flow": "1200.0",
        "valve_open_frac": "1.0",
        "yd_sp": "86.0",
    },
    "simulation": {
        "controller": "mpc",
        "dt_min": "2.5",
        "hours": "120.0",
        "seed": "0",
        "x0": "86.0, 86.0",
        "yc0": "22.0",
        "safety_lo": "77.0",
        "safety_hi": "95.0",
    },
}


def _read_file(path) -> configparser.ConfigParser:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    return parser


def load_effective(path, overrides: dict | None = None) -> dict:
    """Parse + validate a config file into the effective key/value strings."""
    parser = _read_file(path)
    effective = {s: dict(keys) for s, keys in DEFAULTS.items()}
    defaulted = []
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
            effective[section][key] = value
    for section, keys in DEFAULTS.items():
        for key in keys:
            if not parser.has_option(section, key):
                defaulted.append(f"{section}.{key}")
    if defaulted:
        log.info("using defaults for %d keys: %s", len(defaulted),
                 ", ".join(defaulted))
    for dotted, value in (overrides or {}).items():
        section, key = dotted.rsplit(".", 1)
        if section not in effective or key not in effective[section]:
            raise ConfigError(f"unknown override {dotted}")
        effective[section][key] = str(value)
    return effective


def dump_effective(effective: dict) -> str:
    lines = []
    for section, keys in effective.items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def _get(effective, section, key, conv, positive=False):
    raw = effective[section][key]
    try:
        value = conv(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r}")
    if positive and value <= 0:
        raise ConfigError(f"{section}.{key} must be > 0, got {value}")
    return value


def build_scenario(effective: dict) -> Scenario:
    """Turn effective config strings into a validated Scenario."""
    f = lambda s, k, **kw: _get(effective, s, k, float, **kw)  # noqa: E731
    i = lambda s, k, **kw: _get(effective, s, k, int, **kw)    # noqa: E731

    plant_kwargs = {}
    for key, attr in [("r_treat", "r_treat"), ("r_dist", "r_dist")]:
        raw = effective["plant"][key].strip()
        if raw:
            plant_kwargs[attr] = f("plant", key, positive=True)
    plant = PlantParams(
        c_1=f("plant", "c_1", positive=True),
        c_2=f("plant", "c_2", positive=True),
        p_s=f("plant", "p_s", positive=True),
        reservoir_pressure=f("plant", "reservoir_pressure"),
        p_b_min=f("plant", "p_b_min"),
        p_b_max=f("plant", "p_b_max", positive=True),
        f_p1_max=f("plant", "f_p1_max", positive=True),
        f_p2_max=f("plant", "f_p2_max", positive=True),
        r_1_max=f("plant", "r_1_max", positive=True),
        r_2_max=f("plant", "r_2_max", positive=True),
        **plant_kwargs)

    seed = i("simulation", "seed")
    table = effective["demand"]["table"].strip()
    if table:
        t_min, gpm = load_demand_table(table)
        demand = DemandProfile(table_t_min=t_min, table_gpm=gpm, seed=seed)
    else:
        demand = DemandProfile(
            mean_gpm=f("demand", "mean_gpm"),
            amplitude=f("demand", "amplitude"),
            peak_hour=f("demand", "peak_hour"),
            noise=f("demand", "noise"),
            seed=seed)

    res_raw = effective["controller.mpc"]["resolution"]
    parts = [p for p in res_raw.replace(",", " ").split() if p]
    try:
        resolution = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"controller.mpc.resolution: bad value {res_raw!r}")
    if len(resolution) == 1:
        resolution = resolution[0]

    mpc = MpcConfig(
        lam_c=f("controller.mpc", "lam_c"),
        lam_d=f("controller.mpc", "lam_d"),
        lam_e=f("controller.mpc", "lam_e"),
        yd_sp=f("controller.mpc", "yd_sp"),
        yc_sp=f("controller.mpc", "yc_sp"),
        horizon=i("controller.mpc", "horizon", positive=True),
        resolution=resolution,
        alpha=f("controller.mpc", "alpha"),
        x_lo=f("controller.mpc", "x_lo"),
        x_hi=f("controller.mpc", "x_hi"),
        yp_lo=f("controller.mpc", "yp_lo"),
        yp_hi=f("controller.mpc", "yp_hi"))

    reactive = ReactiveConfig(
        low_threshold=f("controller.reactive", "low_threshold"),
        high_threshold=f("controller.reactive", "high_threshold"),
        k_p=f("controller.reactive", "k_p"),
        k_i=f("controller.reactive", "k_i"),
        pump_flow=f("controller.reactive", "pump_flow", positive=True),
        valve_open_frac=f("controller.reactive", "valve_open_frac"),
        yd_sp=f("controller.reactive", "yd_sp"))

    dt = f("simulation", "dt_min", positive=True)
    hours = f("simulation", "hours", positive=True)
    horizon_min = mpc.horizon * dt
    needed_hours = int(math.ceil(hours + horizon_min / 60.0)) + 1

    source = effective["emissions"]["source"].strip().lower()
    if source == "synthetic":
        # at least one full day so every source (solar!) has support
        mix = synthetic_mix(max(needed_hours, 24), seed=seed,
                            ghg_noise=f("emissions", "ghg_noise"))
    elif source == "csv":
        csv_path = effective["emissions"]["csv"].strip()
        if not csv_path:
            raise ConfigError("emissions.source = csv needs emissions.csv")
        mix = load_mix_csv(csv_path)
        if len(mix) < needed_hours:
            raise ConfigError(
                f"emissions csv covers {len(mix)} h, need {needed_hours}")
    else:
        raise ConfigError(f"emissions.source must be synthetic or csv, "
                          f"got {source!r}")
    fit = fit_emissions_coefficients(mix)
    phi = intensity_series(fit, mix, needed_hours)

    x0_raw = effective["simulation"]["x0"]
    try:
        x0 = tuple(float(p) for p in x0_raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"simulation.x0: bad value {x0_raw!r}")

    mode = effective["quality"]["mode"].strip()
    return Scenario(
        plant=plant, demand=demand, phi=phi,
        controller=effective["simulation"]["controller"].strip(),
        mpc=mpc, reactive=reactive,
        dt=dt, hours=hours,
        k_per_day=f("quality", "k_per_day"),
        detention_min=f("quality", "detention_min", positive=True),
        dose=f("quality", "dose"),
        min_chlorine=f("quality", "min_chlorine"),
        chlorine_mode=mode,
        x0=x0, yc0=f("simulation", "yc0"),
        safety_lo=f("simulation", "safety_lo"),
        safety_hi=f("simulation", "safety_hi"))


def load_scenario(path, overrides: dict | None = None
                  ) -> tuple[Scenario, dict]:
    effective = load_effective(path, overrides)
    return build_scenario(effective), effective
