"""
EDF Linear Module

Generalized ridge regression that penalizes only the features in C:

    b = argmin ||Y - Xb||^2 + ||Db||^2 = (X'X + D^2)^-1 X'Y

fitted either in closed form or as ordinary least squares on a design
augmented with artificial rows (D, 0). Both paths work on centered data;
the intercept is never penalized.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy import linalg

from edf_fair.errors import ConfigError, DataError, SingularMatrixError
from edf_fair.tabular import BINARY, Dataset, DeweightSpec
from edf_fair.utils import as_query_matrix, get_logger, solve_spd

CLOSED_FORM = "closed-form"
AUGMENTED = "augmented"
FIT_METHODS = (CLOSED_FORM, AUGMENTED)


@dataclass(frozen=True)
class RidgeDeweightModel:
    """
    Fitted deweighted ridge model on standardized coordinates.

    Attributes:
        coefficients: b, one per feature
        intercept: Unpenalized intercept from centering
        d: Diagonal of D (delta_i = d_i^2)
        fit_method: "closed-form" or "augmented"
        y_kind: Outcome kind of the training data
        feature_names: Training feature names
    """

    coefficients: np.ndarray
    intercept: float
    d: np.ndarray
    fit_method: str = CLOSED_FORM
    y_kind: str = "continuous"
    feature_names: Tuple[str, ...] = ()

    family = "linear-edf"

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.coefficients)) or not np.isfinite(self.intercept):
            raise SingularMatrixError("fit produced non-finite coefficients")

    @property
    def p(self) -> int:
        return self.coefficients.shape[0]

    def predict(self, x_new: Any) -> np.ndarray:
        """Conditional mean on standardized coordinates."""
        x = as_query_matrix(x_new, self.p)
        return self.intercept + x @ self.coefficients

    def predict_proba(self, x_new: Any) -> np.ndarray:
        """
        Linear-probability estimate for 0/1 outcomes, clipped to [0, 1].

        Returns:
            np.ndarray: (m, 2) columns P(Y=0), P(Y=1)
        """
        if self.y_kind != BINARY:
            raise DataError("predict_proba requires a model fitted on a binary outcome")
        p1 = np.clip(self.predict(x_new), 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])

    def conditional_mean(self, data: Dataset) -> np.ndarray:
        return self.predict(data.x)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "coefficients": self.coefficients.tolist(),
            "intercept": float(self.intercept),
            "d": self.d.tolist(),
            "fit_method": self.fit_method,
            "y_kind": self.y_kind,
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "RidgeDeweightModel":
        return cls(
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            intercept=float(payload["intercept"]),
            d=np.asarray(payload["d"], dtype=float),
            fit_method=payload.get("fit_method", CLOSED_FORM),
            y_kind=payload.get("y_kind", "continuous"),
            feature_names=tuple(payload.get("feature_names", ())),
        )


def _centered(train: Dataset, spec: DeweightSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    if not isinstance(train, Dataset):
        raise TypeError("train must be a Dataset")
    if not isinstance(spec, DeweightSpec):
        raise TypeError("spec must be a DeweightSpec")
    spec.check(train.c_mask)
    x_mean = train.x.mean(axis=0)
    y_mean = float(train.y.mean())
    return train.x - x_mean, train.y - y_mean, x_mean, y_mean


def fit_closed_form(train: Dataset, spec: DeweightSpec) -> RidgeDeweightModel:
    """
    Solves (X'X + D^2) b = X'Y on centered data by Cholesky factorization.

    Args:
        train (Dataset): Training data
        spec (DeweightSpec): Uses ridge_d (zero off C)

    Returns:
        RidgeDeweightModel: Fitted model

    Raises:
        SingularMatrixError: If X'X + D^2 is singular
    """
    logger = get_logger("Linear")
    xc, yc, x_mean, y_mean = _centered(train, spec)
    d = np.asarray(spec.ridge_d, dtype=float)
    gram = xc.T @ xc + np.diag(d * d)
    b = solve_spd(gram, xc.T @ yc, what="X'X + D^2")
    logger.debug(f"closed-form fit: n={train.n}, p={train.p}, max d^2={float(np.max(d * d)):.4g}")
    return RidgeDeweightModel(
        coefficients=b,
        intercept=y_mean - float(x_mean @ b),
        d=d.copy(),
        fit_method=CLOSED_FORM,
        y_kind=train.y_kind,
        feature_names=tuple(train.feature_names),
    )


def augmented_design(train: Dataset, spec: DeweightSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Builds the artificial-row system: A = [Xc; D], B = [Yc; 0].

    Args:
        train (Dataset): Training data
        spec (DeweightSpec): Uses ridge_d

    Returns:
        Tuple[np.ndarray, np.ndarray]: A of shape (n + p, p), B of shape (n + p,)
    """
    xc, yc, _, _ = _centered(train, spec)
    d = np.asarray(spec.ridge_d, dtype=float)
    a = np.vstack([xc, np.diag(d)])
    b = np.concatenate([yc, np.zeros(train.p)])
    return a, b


def fit_augmented(train: Dataset, spec: DeweightSpec) -> RidgeDeweightModel:
    """
    Fits ordinary least squares on the augmented design, which yields the
    same estimator as fit_closed_form.

    Args:
        train (Dataset): Training data
        spec (DeweightSpec): Uses ridge_d

    Returns:
        RidgeDeweightModel: Fitted model with fit_method "augmented"

    Raises:
        SingularMatrixError: If the augmented design is rank deficient
    """
    logger = get_logger("Linear")
    a, rhs = augmented_design(train, spec)
    x_mean = train.x.mean(axis=0)
    y_mean = float(train.y.mean())
    b, _, rank, sv = linalg.lstsq(a, rhs, lapack_driver="gelsd", check_finite=False)
    if rank < train.p or sv[-1] <= 1e-12 * sv[0]:
        raise SingularMatrixError(f"augmented design is rank deficient (rank {rank} < p={train.p})")
    logger.debug(f"augmented fit: {a.shape[0]} rows (n={train.n} + p={train.p} artificial)")
    return RidgeDeweightModel(
        coefficients=np.asarray(b, dtype=float),
        intercept=y_mean - float(x_mean @ b),
        d=np.asarray(spec.ridge_d, dtype=float).copy(),
        fit_method=AUGMENTED,
        y_kind=train.y_kind,
        feature_names=tuple(train.feature_names),
    )


def fit_linear(train: Dataset, spec: DeweightSpec, method: str = CLOSED_FORM) -> RidgeDeweightModel:
    """Dispatches to fit_closed_form or fit_augmented."""
    if method == CLOSED_FORM:
        return fit_closed_form(train, spec)
    if method == AUGMENTED:
        return fit_augmented(train, spec)
    raise ConfigError(f"fit_method must be one of {FIT_METHODS}, got {method!r}")


def predict(model: RidgeDeweightModel, x_new: Any) -> np.ndarray:
    """
    Predicts intercept + x.b for standardized rows (a p-vector or (m, p) matrix).

    Raises:
        DataError: On dimension mismatch or non-finite input
    """
    return model.predict(x_new)


def penalized_norm(model: RidgeDeweightModel) -> float:
    """Sum of (d_i b_i)^2: the quantity bounded in the dual (constrained) form."""
    return float(np.sum((model.d * model.coefficients) ** 2))


def c_coefficient_norm(model: RidgeDeweightModel, c_mask: Any) -> float:
    """Sum of squared coefficients on C."""
    c_mask = np.asarray(c_mask, dtype=bool)
    return float(np.sum(model.coefficients[c_mask] ** 2))


def coefficient_table(model: RidgeDeweightModel) -> List[Tuple[str, float, float]]:
    """(feature, d^2, coefficient) rows for reporting."""
    names = model.feature_names or tuple(f"x{j + 1}" for j in range(model.p))
    return [(names[j], float(model.d[j] ** 2), float(model.coefficients[j])) for j in range(model.p)]
