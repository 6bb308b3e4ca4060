"""Shared fixtures and helpers for the test suite."""

import os
from pathlib import Path

import numpy as np
import pytest

from mvtsens import (
    GpsSpec,
    ObservationalDataset,
    ScenarioConfig,
    generate_dataset,
)

# Optional real-data file for the golden tests. Either set MVTSENS_FISH_CSV
# or drop the prepared file at data/fish_consumption.csv (see README for the
# expected schema and where to obtain the raw data).
FISH_ENV = "MVTSENS_FISH_CSV"
FISH_DEFAULT = Path(__file__).resolve().parents[1] / "data" / "fish_consumption.csv"

FISH_COVARIATES = [
    "gender",
    "age",
    "income",
    "income_missing",
    "race",
    "education",
    "smoking_ever",
    "smoking_now",
]


def fish_csv_path():
    env = os.environ.get(FISH_ENV)
    if env:
        p = Path(env)
        if p.exists():
            return p
    if FISH_DEFAULT.exists():
        return FISH_DEFAULT
    return None


def random_dataset(rng, n=None, num_levels=None, max_covariates=3):
    """Random softmax-assigned dataset; every level guaranteed present."""
    n = int(n if n is not None else rng.integers(30, 200))
    J = int(num_levels if num_levels is not None else rng.integers(2, 5))
    d = int(rng.integers(1, max_covariates + 1))
    X = rng.normal(size=(n, d))
    beta = rng.normal(scale=0.7, size=(J, d + 1))
    eta = np.column_stack([np.ones(n), X]) @ beta.T
    eta -= eta.max(axis=1, keepdims=True)
    probs = np.exp(eta)
    probs /= probs.sum(axis=1, keepdims=True)
    u = rng.random(n)
    treatments = 1 + (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
    treatments = np.minimum(treatments, J).astype(np.int64)
    for a in range(1, J + 1):
        if not (treatments == a).any():
            treatments[rng.integers(0, n)] = a
    outcomes = rng.normal(size=n) + 0.5 * treatments
    names = tuple(f"x{j + 1}" for j in range(d))
    return ObservationalDataset(treatments, X, outcomes, J, names)


@pytest.fixture(scope="session")
def scenario_dataset():
    return generate_dataset(ScenarioConfig(scenario="I", n=400, seed=42))


@pytest.fixture(scope="session")
def scenario_model(scenario_dataset):
    return GpsSpec().fit(scenario_dataset)


@pytest.fixture(scope="session")
def scenario_gps(scenario_dataset, scenario_model):
    from mvtsens import predict_gps

    return predict_gps(scenario_model, scenario_dataset)
