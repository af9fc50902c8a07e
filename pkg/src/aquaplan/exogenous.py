"""Exogenous inputs: water demand F_D(t) and grid emissions intensity phi(t).

The emissions chain is: hourly energy-mix records (MWh per source plus
observed GHG) -> least-squares coefficients (kg CO2 per MWh per source) ->
hourly intensity series phi (kg CO2 per kWh), interpolated linearly in time.
A seeded synthetic generator stands in for the public datasets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FitError, ParseError, SeriesError

SOURCES = ("wind", "solar", "hydro", "gas", "coal", "nuclear")

MIX_HEADER = ["hour", "wind_mwh", "solar_mwh", "hydro_mwh", "gas_mwh",
              "coal_mwh", "nuclear_mwh", "ghg_kg"]

# Ground-truth coefficients used by the synthetic generator, kg CO2 per MWh.
SYNTHETIC_COEFFICIENTS = {
    "wind": 11.0,
    "solar": 41.0,
    "hydro": 24.0,
    "gas": 490.0,
    "coal": 820.0,
    "nuclear": 12.0,
}

MINUTES_PER_DAY = 1440.0


# ---------------------------------------------------------------------------
# demand

@dataclass(frozen=True)
class DemandProfile:
    """Daily-cyclic demand with optional noise or a tabulated series.

    The deterministic part is mean*(1 + amplitude*cos(2*pi*(t - phase)/1440))
    with the phase given as the hour of the daily peak.  Noise, when enabled,
    is zero-mean Gaussian with standard deviation noise*mean, piecewise
    constant per minute and fully determined by (seed, minute).
    """

    mean_gpm: float = 5_000_000.0 / MINUTES_PER_DAY
    amplitude: float = 0.3
    peak_hour: float = 18.0
    noise: float = 0.0
    seed: int = 0
    table_t_min: np.ndarray | None = field(default=None, repr=False)
    table_gpm: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mean_gpm < 0 or self.noise < 0:
            raise ConfigError("demand mean and noise must be >= 0")
        if self.table_t_min is not None:
            t = np.asarray(self.table_t_min, dtype=float)
            g = np.asarray(self.table_gpm, dtype=float)
            if t.ndim != 1 or t.shape != g.shape or t.size < 2:
                raise ConfigError("demand table needs matching 1-D columns")
            if np.any(np.diff(t) <= 0):
                raise ConfigError("demand table times must be increasing")
            object.__setattr__(self, "table_t_min", t)
            object.__setattr__(self, "table_gpm", g)

    def demand_at(self, t_min: float) -> float:
        """Demand (GPM) at time t (minutes), clamped at 0."""
        if t_min < 0:
            raise SeriesError("demand time must be >= 0")
        if self.table_t_min is not None:
            if t_min > self.table_t_min[-1] or t_min < self.table_t_min[0]:
                raise SeriesError(
                    f"t = {t_min} min outside tabulated demand range")
            return float(max(0.0, np.interp(t_min, self.table_t_min,
                                            self.table_gpm)))
        phase_min = self.peak_hour * 60.0
        # reduce into one day first so periodicity holds exactly
        day_frac = ((t_min - phase_min) % MINUTES_PER_DAY) / MINUTES_PER_DAY
        value = self.mean_gpm * (
            1.0 + self.amplitude * math.cos(2.0 * math.pi * day_frac))
        if self.noise > 0:
            rng = np.random.default_rng((self.seed, int(t_min)))
            value += self.mean_gpm * self.noise * rng.standard_normal()
        return max(0.0, value)


def load_demand_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a `minute,gpm` CSV for tabulated demand."""
    times, flows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["minute", "gpm"]:
            raise ParseError(f"{path}: expected header 'minute,gpm'", line=1)
        for ln, row in enumerate(reader, start=2):
            try:
                times.append(float(row[0]))
                flows.append(float(row[1]))
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{ln}: malformed row {row!r}",
                                 line=ln)
    if len(times) < 2:
        raise ParseError(f"{path}: demand table needs at least 2 rows")
    return np.array(times), np.array(flows)


# ---------------------------------------------------------------------------
# energy mix and regression

@dataclass(frozen=True)
class EnergyMixRecord:
    hour: int
    wind: float
    solar: float
    hydro: float
    gas: float
    coal: float
    nuclear: float
    ghg_kg: float

    def __post_init__(self):
        for s in SOURCES:
            if getattr(self, s) < 0:
                raise ConfigError(f"hour {self.hour}: {s} production < 0")

    def production(self) -> np.ndarray:
        return np.array([getattr(self, s) for s in SOURCES])


@dataclass(frozen=True)
class EmissionsFit:
    coefficients: dict      # source -> kg CO2 per MWh
    residual_rms: float     # kg CO2

    def as_array(self) -> np.ndarray:
        return np.array([self.coefficients[s] for s in SOURCES])


def fit_emissions_coefficients(records) -> EmissionsFit:
    """Ordinary least squares of GHG on the six productions, no intercept."""
    records = list(records)
    if len(records) < len(SOURCES):
        raise FitError(
            f"need at least {len(SOURCES)} records, got {len(records)}")
    design = np.array([r.production() for r in records])
    ghg = np.array([r.ghg_kg for r in records])
    rank = np.linalg.matrix_rank(design)
    if rank < len(SOURCES):
        zero = [s for k, s in enumerate(SOURCES)
                if not np.any(design[:, k])]
        detail = (f"all-zero sources: {', '.join(zero)}" if zero
                  else "collinear source columns")
        raise FitError(f"rank-deficient design matrix ({detail})")
    coeffs, _, _, _ = np.linalg.lstsq(design, ghg, rcond=None)
    resid = ghg - design @ coeffs
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return EmissionsFit(dict(zip(SOURCES, coeffs)), rms)


@dataclass(frozen=True)
class EmissionsIntensitySeries:
    """Hourly phi values (kg CO2 per kWh) with linear interpolation."""

    hours: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        if np.any(self.phi < 0):
            raise SeriesError("phi must be >= 0")

    def phi_at(self, t_min: float) -> float:
        h = t_min / 60.0
        if h < self.hours[0] or h > self.hours[-1]:
            raise SeriesError(f"t = {t_min} min outside the phi series")
        return float(np.interp(h, self.hours, self.phi))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hour", "phi_kg_per_kwh"])
            for h, v in zip(self.hours, self.phi):
                writer.writerow([int(h), repr(float(v))])


def intensity_series(fit: EmissionsFit, mix, length_hours: int
                     ) -> EmissionsIntensitySeries:
    """phi(hour) = predicted GHG / total production, per hour."""
    mix = list(mix)
    if len(mix) < length_hours:
        raise SeriesError(
            f"mix covers {len(mix)} hours, need {length_hours}")
    coeffs = fit.as_array()
    hours = np.arange(length_hours, dtype=float)
    phi = np.empty(length_hours)
    for k in range(length_hours):
        prod = mix[k].production()
        total = prod.sum()
        if total <= 0:
            raise SeriesError(f"hour {mix[k].hour}: zero total production")
        # coefficients are per MWh, phi is per kWh
        phi[k] = (prod @ coeffs) / total / 1000.0
    return EmissionsIntensitySeries(hours, np.maximum(phi, 0.0))


# ---------------------------------------------------------------------------
# synthetic generator and CSV I/O

def synthetic_mix(hours: int, seed: int = 0, ghg_noise: float = 0.0
                  ) -> list[EnergyMixRecord]:
    """Deterministic energy-mix stand-in with solar midday peaks.

    GHG observations follow SYNTHETIC_COEFFICIENTS exactly unless
    ``ghg_noise`` (fractional sigma) is set.
    """
    if hours <= 0:
        raise ConfigError("hours must be > 0")
    rng = np.random.default_rng(seed)
    records = []
    for h in range(hours):
        hd = h % 24
        day = h // 24
        weather = 0.75 + 0.25 * math.sin(2.0 * math.pi * (day + seed) / 7.3)
        solar = 900.0 * max(0.0, math.sin(math.pi * (hd - 6.0) / 12.0))
        solar *= weather
        wind = 350.0 * (0.8 + 0.4 * math.sin(2.0 * math.pi * h / 31.7))
        # independent slow ripples keep the design matrix full rank
        hydro = 150.0 * (1.0 + 0.10 * math.sin(2.0 * math.pi * h / 53.1))
        nuclear = 600.0 * (1.0 + 0.04 * math.sin(2.0 * math.pi * h / 101.3))
        coal = 500.0 * (1.0 + 0.12 * math.sin(2.0 * math.pi * h / 26.3))
        total_demand = 2500.0 * (
            1.0 + 0.25 * math.cos(2.0 * math.pi * (hd - 18.0) / 24.0))
        gas = max(0.0, total_demand - wind - solar - hydro - nuclear - coal)
        prod = {"wind": wind, "solar": solar, "hydro": hydro,
                "gas": gas, "coal": coal, "nuclear": nuclear}
        ghg = sum(SYNTHETIC_COEFFICIENTS[s] * prod[s] for s in SOURCES)
        if ghg_noise > 0:
            ghg *= 1.0 + ghg_noise * rng.standard_normal()
        records.append(EnergyMixRecord(hour=h, ghg_kg=ghg, **prod))
    return records


def load_mix_csv(path) -> list[EnergyMixRecord]:
    records = []
    last_hour = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file", line=1)
        if header != MIX_HEADER:
            raise ParseError(
                f"{path}: expected header {','.join(MIX_HEADER)}", line=1)
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(MIX_HEADER):
                raise ParseError(f"{path}:{ln}: expected "
                                 f"{len(MIX_HEADER)} fields", line=ln)
            try:
                hour = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise ParseError(f"{path}:{ln}: malformed row {row!r}",
                                 line=ln)
            if last_hour is not None and hour <= last_hour:
                raise ParseError(
                    f"{path}:{ln}: timestamps must be increasing", line=ln)
            last_hour = hour
            try:
                records.append(EnergyMixRecord(hour, *values))
            except ConfigError as exc:
                raise ParseError(f"{path}:{ln}: {exc}", line=ln)
    if not records:
        raise ParseError(f"{path}: no data rows")
    return records


def write_mix_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MIX_HEADER)
        for r in records:
            writer.writerow(
                [r.hour] + [repr(float(getattr(r, s))) for s in SOURCES]
                + [repr(float(r.ghg_kg))])
