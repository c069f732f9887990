"""
Runs against the public census (pef), COMPAS (fairml) and Boston mortgage
(SortedEffects) CSVs when the corresponding environment variable points
at a file. Skipped otherwise.
"""

import os

import pytest

from edf_fair.harness import ExperimentConfig, run_experiment

pytestmark = [pytest.mark.external, pytest.mark.acceptance]

REPLICATIONS = int(os.environ.get("EDF_EXTERNAL_REPLICATIONS", "5"))


def csv_from_env(name):
    path = os.environ.get(name)
    if not path or not os.path.isfile(path):
        pytest.skip(f"{name} is not set to a CSV file")
    return path


def run(data, family, grid, **extra):
    config = ExperimentConfig.from_dict(dict(
        data=data, family=family, deweight_grid=grid, replications=REPLICATIONS, holdout_size=1000, **extra))
    return run_experiment(config).table


def test_census_linear():
    path = csv_from_env("EDF_CENSUS_CSV")
    # educ stays numeric-coded: an unpenalized full one-hot block is collinear with the intercept
    table = run({"path": path, "outcome": "wageinc", "sensitive": ["sex"], "c_features": ["occ"],
                 "categorical": ["occ"], "features": ["age", "educ", "occ", "wkswrkd"]},
                "linear-edf", [1.0])
    row = table.rows[0]
    assert 24500 <= row.mean_utility <= 26800
    assert 0.18 <= row.mean_rho[0] <= 0.26


def test_compas_forest():
    path = csv_from_env("EDF_COMPAS_CSV")
    table = run({"path": path, "outcome": "two_year_recid", "sensitive": ["race"],
                 "c_features": ["decile_score", "sex", "priors_count", "age"],
                 "features": ["age", "juv_fel_count", "decile_score", "juv_misd_count", "juv_other_count",
                              "v_decile_score", "priors_count", "sex"]},
                "forest", [1.0])
    row = table.rows[0]
    rho = dict(zip(table.categories, row.mean_rho))
    label = next(c for c in table.categories if c.endswith("African-American"))
    assert 0.19 <= row.mean_utility <= 0.24
    assert 0.27 <= rho[label] <= 0.35


def test_mortgage_knn():
    path = csv_from_env("EDF_MORTGAGE_CSV")
    table = run({"path": path, "outcome": "deny", "sensitive": ["black"], "c_features": ["loan_val"]},
                "knn", [1.0], proxy_adequacy={"sensitive": "black"})
    row = table.rows[0]
    assert 0.07 <= row.mean_utility <= 0.12
    assert 0.04 <= row.mean_rho[0] <= 0.08
    assert all(v > 0.5 for v in row.mean_proxy)
