"""
Example usage of the EDF fairness toolkit

This script demonstrates the deweighting tradeoff on synthetic census-style
data: fit a model, evaluate rho^2 and MAPE, and run a small replicated
experiment over a grid of deweighting values.
"""

import os
import tempfile

from edf_fair import (
    DeweightSpec, ExperimentConfig, evaluate_model, fit_linear, load_csv, rank_proxy_features,
    run_experiment, select_deweight, split_holdout,
)
from edf_fair.synthetic import write_census_style_csv


def example_single_fit(csv_path):
    """Example of fitting and evaluating one deweighted linear model."""

    # occ is the proxy feature set C; gender never enters X
    data = load_csv(csv_path, outcome="wageinc", sensitive=["gender"], c_features=["occ"],
                    categorical=["occ"])
    train, test = split_holdout(data, holdout_size=500, seed=1)

    for delta in (1.0, 625.0, 15625.0):
        model = fit_linear(train, DeweightSpec.common(train.c_mask, delta=delta))
        report = evaluate_model(model, train, test, deweight=delta)
        print(report.to_table())

    print("Features most correlated with gender:")
    for name, score in rank_proxy_features(data, 0)[:6]:
        print(f"  - {name}: {score:.4f}")


def example_experiment(csv_path):
    """Example of a replicated-holdout experiment and a rho^2-capped choice."""

    config = ExperimentConfig.from_dict({
        "data": {
            "path": csv_path,
            "outcome": "wageinc",
            "sensitive": ["gender"],
            "c_features": ["occ"],
            "categorical": ["occ"],
        },
        "family": "linear-edf",
        "deweight_grid": [1, 25, 625, 15625],
        "replications": 10,
        "holdout_size": 500,
    })
    result = run_experiment(config, threads=4)
    print(result.table.to_text())

    choice = select_deweight(result.table, rho_cap=0.05)
    status = "meets" if choice.feasible else "does not meet"
    print(f"Chosen deweighting: {choice.deweight:g} ({status} the rho^2 cap {choice.rho_cap})")


if __name__ == "__main__":
    print("EDF Fairness Examples")
    print("=====================\n")

    with tempfile.TemporaryDirectory() as tmp:
        csv_path = write_census_style_csv(os.path.join(tmp, "census.csv"), n=3000, seed=0)

        print("Example 1: Single Fit")
        print("---------------------")
        example_single_fit(csv_path)

        print("\nExample 2: Replicated Experiment")
        print("--------------------------------")
        example_experiment(csv_path)
