"""
EDF Two-Stage Baseline Module

Residualization baseline: regress X on S, keep residuals U (uncorrelated
with S in-sample), then regress Y on (S, U) with a ridge penalty on the S
coefficients only. S-free predictions use beta'U.
"""

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from edf_fair.errors import ConfigError, DataError, SingularMatrixError
from edf_fair.tabular import BINARY, Dataset
from edf_fair.utils import as_query_matrix, get_logger, settings, solve_spd

# Residual columns smaller than this fraction of the original column are treated as zero
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class TwoStageModel:
    """
    Fitted two-stage model.

    Attributes:
        gamma: (q, p) first-stage coefficients, E(X|S) = S gamma on centered data
        alpha: (q,) second-stage coefficients on S
        beta: (p,) second-stage coefficients on U
        lam: Ridge penalty on alpha
        intercept: Chosen so that prediction = intercept + beta'(x - s gamma)
        s_mean: Training means of S, used when alpha'S is included
        y_kind: Outcome kind of the training data
        include_sensitive: Whether conditional_mean adds alpha'(s - s_mean)
    """

    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    lam: float
    intercept: float
    s_mean: np.ndarray
    y_kind: str = "continuous"
    include_sensitive: bool = False

    family = "twostage"

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    @property
    def q(self) -> int:
        return self.alpha.shape[0]

    def predict_sfree(self, x_new: Any, s_new: Any, include_sensitive: bool = False) -> np.ndarray:
        """
        beta'u with u = x - s gamma (plus the intercept).

        Args:
            x_new (Any): (m, p) standardized features
            s_new (Any): (m, q) sensitive attributes
            include_sensitive (bool): Also add alpha'(s - s_mean), for study only

        Returns:
            np.ndarray: (m,) predictions
        """
        x = as_query_matrix(x_new, self.p, "x_new")
        s = as_query_matrix(s_new, self.q, "s_new")
        if s.shape[0] != x.shape[0]:
            raise DataError(f"x_new has {x.shape[0]} rows but s_new has {s.shape[0]}")
        u = x - s @ self.gamma
        pred = self.intercept + u @ self.beta
        if include_sensitive:
            pred = pred + (s - self.s_mean) @ self.alpha
        return pred

    def conditional_mean(self, data: Dataset) -> np.ndarray:
        return self.predict_sfree(data.x, data.s, include_sensitive=self.include_sensitive)

    def predict_proba_data(self, data: Dataset) -> np.ndarray:
        """Linear-probability estimate for 0/1 outcomes, clipped to [0, 1]; (m, 2)."""
        if self.y_kind != BINARY:
            raise DataError("probabilities require a model fitted on a binary outcome")
        p1 = np.clip(self.conditional_mean(data), 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "lambda": float(self.lam),
            "intercept": float(self.intercept),
            "s_mean": self.s_mean.tolist(),
            "y_kind": self.y_kind,
            "include_sensitive": bool(self.include_sensitive),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "TwoStageModel":
        return cls(
            gamma=np.asarray(payload["gamma"], dtype=float),
            alpha=np.asarray(payload["alpha"], dtype=float),
            beta=np.asarray(payload["beta"], dtype=float),
            lam=float(payload["lambda"]),
            intercept=float(payload["intercept"]),
            s_mean=np.asarray(payload["s_mean"], dtype=float),
            y_kind=payload.get("y_kind", "continuous"),
            include_sensitive=bool(payload.get("include_sensitive", False)),
        )


def residualize(x: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    First stage on centered inputs: gamma = (S'S)^-1 S'X, U = X - S gamma.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (gamma of shape (q, p), U of shape (n, p))
    """
    gamma = solve_spd(s.T @ s, s.T @ x, what="S'S")
    return gamma, x - s @ gamma


def fit_twostage(train: Dataset, lam: Optional[float] = None, include_sensitive: bool = False) -> TwoStageModel:
    """
    Fits the two-stage model, minimizing ||Y - S a - U b||^2 + lam ||a||^2.

    Args:
        train (Dataset): Training data (centered internally)
        lam (Optional[float]): Nonnegative ridge penalty on the S coefficients
            (default [EdfFair.TwoStage] lambda)
        include_sensitive (bool): Deploy with alpha'(s - s_mean) added (study only; default S-free)

    Returns:
        TwoStageModel: Fitted model

    Raises:
        SingularMatrixError: If S'S or the second-stage system is singular
    """
    logger = get_logger("TwoStage")
    if not isinstance(train, Dataset):
        raise TypeError("train must be a Dataset")
    if lam is None:
        lam = settings("EdfFair", "TwoStage").get("lambda", 0.0)
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ConfigError(f"lambda must be a finite nonnegative number, got {lam}")
    if train.q < 1:
        raise DataError("two-stage fit needs at least one sensitive column")

    x_mean = train.x.mean(axis=0)
    s_mean = train.s.mean(axis=0)
    y_mean = float(train.y.mean())
    xc = train.x - x_mean
    sc = train.s - s_mean
    yc = train.y - y_mean

    basis = train.sensitive_basis()
    gamma = np.zeros((train.q, train.p))
    gamma[basis], u = residualize(xc, sc[:, basis])
    x_norms = np.linalg.norm(xc, axis=0)
    u_norms = np.linalg.norm(u, axis=0)
    dead = np.flatnonzero(u_norms <= RESIDUAL_TOL * np.maximum(x_norms, 1.0))
    if dead.size:
        names = [train.feature_names[j] for j in dead]
        raise SingularMatrixError(f"second-stage system is singular: residuals of {names} are identically zero")

    k = basis.shape[0]
    z = np.hstack([sc[:, basis], u])
    penalty = np.concatenate([np.full(k, lam), np.zeros(train.p)])
    theta = solve_spd(z.T @ z + np.diag(penalty), z.T @ yc, what="second-stage system")
    alpha = np.zeros(train.q)
    alpha[basis] = theta[:k]
    beta = theta[k:]

    # prediction = y_mean + beta'((x - x_mean) - (s - s_mean) gamma)
    intercept = y_mean - float((x_mean - s_mean @ gamma) @ beta)
    logger.debug(f"two-stage fit: n={train.n}, p={train.p}, q={train.q}, lambda={lam:.4g}, |alpha|={np.linalg.norm(alpha):.4g}")
    return TwoStageModel(
        gamma=gamma,
        alpha=alpha,
        beta=beta,
        lam=lam,
        intercept=intercept,
        s_mean=s_mean,
        y_kind=train.y_kind,
        include_sensitive=bool(include_sensitive),
    )


def predict_sfree(model: TwoStageModel, x_new: Any, s_new: Any, include_sensitive: bool = False) -> np.ndarray:
    """Module-level form of TwoStageModel.predict_sfree."""
    return model.predict_sfree(x_new, s_new, include_sensitive=include_sensitive)
