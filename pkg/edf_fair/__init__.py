"""
EDF Fairness Package

Explicitly Deweighted Features: shrink, rather than delete, the influence
of proxy features C on predictions, with linear ridge, k-NN and random
forest models, a two-stage residualization baseline, the rho^2 fairness
measure and a replicated-holdout experiment harness.
"""

from .errors import ConfigError, DataError, EdfError, ModelCapabilityError, NumericalError, SingularMatrixError
from .tabular import Dataset, DeweightSpec, load_csv, split_holdout, rank_proxy_features

__version__ = "1.0.0"


def main():
    """Command-line entry point"""
    import sys
    from .cli import main as cli_main

    sys.exit(cli_main())


# Export main components for easy imports
from .linear import RidgeDeweightModel, fit_closed_form, fit_augmented, fit_linear
from .twostage import TwoStageModel, fit_twostage, predict_sfree
from .knn import KnnModel, knn_fit, knn_predict, knn_predict_proba
from .forest import ForestConfig, ForestModel, forest_fit, forest_predict, forest_predict_proba
from .fairness import FairnessReport, build_T, build_W, rho_squared, mape, opm, proxy_adequacy, evaluate_model
from .harness import ExperimentConfig, ReplicationTable, run_experiment, select_deweight, aggregate
