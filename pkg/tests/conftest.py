import pathlib

import numpy as np
import pytest

from aquaplan.exogenous import (fit_emissions_coefficients, intensity_series,
                                synthetic_mix)
from aquaplan.network import PlantParams, build_example_plant

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]
DEFAULT_CFG = REPO_ROOT / "configs" / "default.cfg"
MIX_CSV = REPO_ROOT / "data" / "energy_mix_120h.csv"


@pytest.fixture(scope="session")
def model():
    return build_example_plant(PlantParams())


@pytest.fixture(scope="session")
def params():
    return PlantParams()


def make_phi(hours, seed=0):
    # a full day of records keeps the regression full rank (solar is dark
    # at night)
    mix = synthetic_mix(max(hours, 24), seed=seed)
    fit = fit_emissions_coefficients(mix)
    return intensity_series(fit, mix, hours)


def balanced_noisy_mix(n, seed, noise):
    """Records from known coefficients with a well-conditioned design."""
    from aquaplan.exogenous import SYNTHETIC_COEFFICIENTS, EnergyMixRecord

    rng = np.random.default_rng(seed)
    records = []
    for h in range(n):
        prod = {
            "wind": rng.uniform(0.0, 2000.0),
            "solar": rng.uniform(0.0, 2000.0),
            "hydro": rng.uniform(0.0, 2000.0),
            "gas": rng.uniform(0.0, 300.0),
            "coal": rng.uniform(0.0, 200.0),
            "nuclear": rng.uniform(0.0, 2000.0),
        }
        ghg = sum(SYNTHETIC_COEFFICIENTS[s] * p for s, p in prod.items())
        ghg *= 1.0 + noise * rng.standard_normal()
        records.append(EnergyMixRecord(hour=h, ghg_kg=ghg, **prod))
    return records


@pytest.fixture(scope="session")
def phi16():
    return make_phi(16)


def random_state_controls(model, rng, n):
    """n random (x, u, f_demand) triples inside bounds."""
    lo, hi = model.control_lower, model.control_upper
    for _ in range(n):
        x = rng.uniform(78.0, 94.0, size=model.n_tanks)
        u = rng.uniform(lo, hi)
        fd = rng.uniform(0.0, 6000.0)
        yield x, u, fd
