"""
EDF Fairness Metrics Module

The fairness measure rho^2(T, W): squared Pearson correlation between a
continuous surrogate T of the prediction and a continuous surrogate W of
each sensitive column.

    T = Yhat            for continuous Y,  T = P(Y = 1 | X) for 0/1 Y
    W = S               for continuous S,  W = P(S = 1 | X) for 0/1 S

P(S = 1 | X) comes from an auxiliary model fitted on training rows and
evaluated on the holdout. Also: utility metrics (MAPE as mean absolute
error, OPM) and per-category proxy adequacy.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import warnings

import numpy as np
from scipy import linalg, stats

from edf_fair.errors import ConfigError, DataError, ModelCapabilityError
from edf_fair.knn import knn_fit
from edf_fair.tabular import BINARY, CONTINUOUS, Dataset, DeweightSpec
from edf_fair.utils import get_logger, settings

AUX_KNN = "knn"
AUX_LINEAR = "linear-probability"
AUX_FAMILIES = (AUX_KNN, AUX_LINEAR)

MAPE = "MAPE"
OPM = "OPM"


@dataclass(frozen=True)
class SurrogatePair:
    """T and W for one sensitive column, with how each was built."""

    t: np.ndarray
    w: np.ndarray
    t_construction: str
    w_construction: str

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if t.shape != w.shape or t.ndim != 1:
            raise DataError(f"T and W must be vectors of equal length, got {t.shape} and {w.shape}")
        if t.shape[0] < 3:
            raise DataError(f"need at least 3 evaluation rows, got {t.shape[0]}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise DataError("T and W must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @property
    def rho_squared(self) -> float:
        return rho_squared(self.t, self.w)


@dataclass(frozen=True)
class FairnessReport:
    """
    One rho^2 per sensitive category plus a utility metric.

    Attributes:
        categories: (label, rho^2) per sensitive column
        utility_name: "MAPE" or "OPM"
        utility_value: Metric value on the evaluation rows
        n_eval: Number of evaluation rows
        evaluated_on: Which rows rho^2 was computed on
        deweight: Deweighting value the model used, if known
        constructions: How T and each W were built
    """

    categories: Tuple[Tuple[str, float], ...]
    utility_name: str
    utility_value: float
    n_eval: int
    evaluated_on: str = "holdout"
    deweight: Optional[Any] = None
    constructions: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for label, value in self.categories:
            if not 0.0 <= value <= 1.0:
                raise DataError(f"rho^2 for {label} outside [0, 1]: {value}")
        if self.utility_name not in (MAPE, OPM):
            raise DataError(f"unknown utility metric {self.utility_name!r}")
        if self.utility_value < 0 or (self.utility_name == OPM and self.utility_value > 1):
            raise DataError(f"invalid {self.utility_name} value {self.utility_value}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "categories": [{"category": label, "rho_squared": value} for label, value in self.categories],
            "utility": {"metric": self.utility_name, "value": self.utility_value},
            "n_eval": self.n_eval,
            "evaluated_on": self.evaluated_on,
            "deweight": self.deweight,
            "constructions": dict(self.constructions),
        }

    def to_table(self) -> str:
        """Aligned text table: deweight | utility | rho^2 (one rho^2 column per category)."""
        labels = [label for label, _ in self.categories]
        header = ["deweight", self.utility_name] + rho_headers(labels)
        row = [
            "-" if self.deweight is None else format_deweight(self.deweight),
            format_utility(self.utility_name, self.utility_value),
        ] + [format_rho(value) for _, value in self.categories]
        return format_table(header, [row])


def rho_squared(t: Any, w: Any) -> float:
    """
    Squared Pearson correlation, in [0, 1].

    Raises:
        DataError: On length mismatch, fewer than 3 values or a constant vector
    """
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    if t.ndim != 1 or t.shape != w.shape:
        raise DataError(f"rho_squared needs equal-length vectors, got {t.shape} and {w.shape}")
    if t.shape[0] < 3:
        raise DataError(f"rho_squared needs at least 3 values, got {t.shape[0]}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
        raise DataError("rho_squared inputs must be finite")
    if np.all(t == t[0]) or np.all(w == w[0]):
        raise DataError("rho_squared is undefined for a constant vector")
    with warnings.catch_warnings():
        # near-constant inputs are legitimate here (e.g. coarse k-NN frequencies)
        warnings.simplefilter("ignore")
        r, _ = stats.pearsonr(t, w)
    return float(min(1.0, r * r))


def mape(y_true: Any, y_pred: Any) -> float:
    """Mean absolute prediction error, mean |y - yhat| (dollar scale, not a percentage)."""
    y_true, y_pred = _paired(y_true, y_pred)
    return float(np.mean(np.abs(y_true - y_pred)))


def opm(y_true: Any, proba: Any, threshold: Optional[float] = None) -> float:
    """
    Overall probability of misclassification: fraction with (P(Y=1) >= threshold) != y.

    Args:
        y_true (Any): 0/1 outcomes
        proba (Any): P(Y=1) vector, or (m, 2) class probabilities
        threshold (Optional[float]): Default 0.5 ([EdfFair.Fairness] threshold)
    """
    if threshold is None:
        threshold = float(settings("EdfFair", "Fairness").get("threshold", 0.5))
    proba = np.asarray(proba, dtype=float)
    if proba.ndim == 2:
        proba = proba[:, 1]
    y_true, proba = _paired(y_true, proba)
    predicted = (proba >= threshold).astype(float)
    return float(np.mean(predicted != y_true))


def probabilities(model: Any, data: Dataset) -> np.ndarray:
    """
    P(Y = 1 | X) from a fitted model.

    Raises:
        ModelCapabilityError: If the model has no probability output
    """
    if hasattr(model, "predict_proba_data"):
        proba = model.predict_proba_data(data)
    elif hasattr(model, "predict_proba"):
        proba = model.predict_proba(data.x)
    else:
        raise ModelCapabilityError(
            f"{type(model).__name__} exposes no probabilities; binary outcomes need P(Y = 1 | X), not hard labels"
        )
    proba = np.asarray(proba, dtype=float)
    return proba[:, 1] if proba.ndim == 2 else proba


def conditional_mean(model: Any, data: Dataset) -> np.ndarray:
    """Estimated E(Y | X) for each row."""
    if hasattr(model, "conditional_mean"):
        return np.asarray(model.conditional_mean(data), dtype=float)
    if hasattr(model, "predict"):
        return np.asarray(model.predict(data.x), dtype=float)
    raise ModelCapabilityError(f"{type(model).__name__} has no prediction method")


def build_T(model: Any, eval_data: Dataset) -> np.ndarray:
    """
    Prediction surrogate: predictions for continuous Y, P(Y = 1 | X) for 0/1 Y (never rounded).

    Args:
        model (Any): Fitted model of any family
        eval_data (Dataset): Evaluation rows

    Returns:
        np.ndarray: (m,) T
    """
    if eval_data.y_kind == BINARY:
        return probabilities(model, eval_data)
    return conditional_mean(model, eval_data)


def build_W(train: Dataset, eval_data: Dataset, sensitive_index: int,
            aux_family: Optional[str] = None, k: Optional[int] = None) -> np.ndarray:
    """
    Sensitive surrogate: the S column itself when continuous; otherwise
    P(S = 1 | X) from an auxiliary model fitted on the training rows.

    Args:
        train (Dataset): Rows the auxiliary model is fitted on
        eval_data (Dataset): Rows W is evaluated on
        sensitive_index (int): Column of s
        aux_family (Optional[str]): "knn" (default) or "linear-probability"
        k (Optional[int]): Neighbors for the k-NN auxiliary (default 25)

    Returns:
        np.ndarray: (m,) W
    """
    fairness_settings = settings("EdfFair", "Fairness")
    aux_family = aux_family or fairness_settings.get("aux_family", AUX_KNN)
    if aux_family not in AUX_FAMILIES:
        raise ConfigError(f"aux_family must be one of {AUX_FAMILIES}, got {aux_family!r}")
    if not 0 <= sensitive_index < eval_data.q:
        raise ConfigError(f"sensitive_index {sensitive_index} out of range for q={eval_data.q}")
    name = eval_data.sensitive_names[sensitive_index]
    s_eval = eval_data.s[:, sensitive_index]
    if np.all(s_eval == s_eval[0]):
        raise DataError(f"Sensitive column {name} takes a single value on the evaluation rows")
    if eval_data.sensitive_kind(sensitive_index) == CONTINUOUS:
        return np.array(s_eval, dtype=float)

    s_train = train.s[:, sensitive_index]
    if np.all(s_train == s_train[0]):
        raise DataError(f"Sensitive column {name} takes a single value on the training rows")
    if aux_family == AUX_KNN:
        k = int(k if k is not None else fairness_settings.get("aux_k", 25))
        aux = knn_fit(train.with_outcome(s_train, BINARY, name), DeweightSpec.none(train.p), min(k, train.n))
        return aux.predict_proba(eval_data.x)[:, 1]
    return _linear_probability(train.x, s_train, eval_data.x)


def build_W_all(train: Dataset, eval_data: Dataset, aux_family: Optional[str] = None,
                k: Optional[int] = None) -> List[np.ndarray]:
    """W for every sensitive column."""
    return [build_W(train, eval_data, j, aux_family, k) for j in range(eval_data.q)]


def w_construction(data: Dataset, index: int, aux_family: Optional[str], k: Optional[int]) -> str:
    """Human-readable record of how W was built for one column."""
    if data.sensitive_kind(index) == CONTINUOUS:
        return "sensitive column"
    fairness_settings = settings("EdfFair", "Fairness")
    aux_family = aux_family or fairness_settings.get("aux_family", AUX_KNN)
    if aux_family == AUX_KNN:
        return f"P(S=1|X) by k-NN (k={int(k if k is not None else fairness_settings.get('aux_k', 25))}) on training rows"
    return "P(S=1|X) by linear probability on training rows, clipped to [0, 1]"


def surrogate_pair(model: Any, train: Dataset, eval_data: Dataset, sensitive_index: int,
                   aux_family: Optional[str] = None, k: Optional[int] = None) -> SurrogatePair:
    """T and W for one sensitive column, with their constructions recorded."""
    t = build_T(model, eval_data)
    w = build_W(train, eval_data, sensitive_index, aux_family, k)
    t_how = "P(Y=1|X)" if eval_data.y_kind == BINARY else "predicted Y"
    return SurrogatePair(t, w, t_how, w_construction(eval_data, sensitive_index, aux_family, k))


def evaluate_model(model: Any, train: Dataset, eval_data: Dataset, aux_family: Optional[str] = None,
                   k: Optional[int] = None, threshold: Optional[float] = None,
                   w_columns: Optional[Sequence[np.ndarray]] = None,
                   deweight: Optional[Any] = None) -> FairnessReport:
    """
    Builds a FairnessReport for a fitted model on evaluation rows.

    Args:
        model (Any): Fitted model
        train (Dataset): Training rows (auxiliary W models)
        eval_data (Dataset): Holdout rows
        aux_family (Optional[str]): Auxiliary family for one-hot S
        k (Optional[int]): k for the k-NN auxiliary
        threshold (Optional[float]): OPM threshold
        w_columns (Optional[Sequence[np.ndarray]]): Precomputed W per sensitive column
        deweight (Optional[Any]): Grid value recorded in the report

    Returns:
        FairnessReport: rho^2 per category and the utility metric
    """
    logger = get_logger("Fairness")
    t = build_T(model, eval_data)
    if w_columns is None:
        w_columns = build_W_all(train, eval_data, aux_family, k)
    if np.all(t == t[0]):
        logger.warning(f"T is constant on {eval_data.n} evaluation rows (deweight={deweight!r}); rho^2 recorded as 0")
        categories = tuple((name, 0.0) for name in eval_data.sensitive_names)
    else:
        categories = tuple(
            (eval_data.sensitive_names[j], rho_squared(t, w_columns[j])) for j in range(eval_data.q)
        )
    if eval_data.y_kind == BINARY:
        utility_name, utility_value = OPM, opm(eval_data.y, t, threshold)
    else:
        utility_name, utility_value = MAPE, mape(eval_data.y, t)
    constructions = {"T": "P(Y=1|X)" if eval_data.y_kind == BINARY else "predicted Y"}
    for j in range(eval_data.q):
        constructions[f"W[{eval_data.sensitive_names[j]}]"] = w_construction(eval_data, j, aux_family, k)
    logger.debug(f"evaluated {type(model).__name__}: {utility_name}={utility_value:.6g}, rho^2={[round(v, 6) for _, v in categories]}")
    return FairnessReport(
        categories=categories,
        utility_name=utility_name,
        utility_value=utility_value,
        n_eval=eval_data.n,
        deweight=deweight,
        constructions=constructions,
    )


def proxy_adequacy(full_fitted: Any, edf_fitted: Any, s_category: Any) -> List[Tuple[str, float]]:
    """
    rho^2 between a full model's fitted values (with S) and the EDF model's,
    computed separately within each sensitive category.

    Args:
        full_fitted (Any): Fitted values of the model that sees S
        edf_fitted (Any): Fitted values of the EDF model
        s_category (Any): Category of each row (e.g. the 0/1 sensitive column)

    Returns:
        List[Tuple[str, float]]: (category label, rho^2), categories in sorted order
    """
    full = np.asarray(full_fitted, dtype=float)
    edf = np.asarray(edf_fitted, dtype=float)
    groups = np.asarray(s_category)
    if full.shape != edf.shape or full.shape != groups.shape or full.ndim != 1:
        raise DataError("proxy_adequacy inputs must be equal-length vectors")
    out: List[Tuple[str, float]] = []
    for level in sorted(set(groups.tolist())):
        mask = groups == level
        if mask.sum() < 3:
            raise DataError(f"category {category_label(level)} has fewer than 3 rows")
        if np.all(edf[mask] == edf[mask][0]):
            get_logger("Fairness").warning(f"EDF fitted values are constant in category {category_label(level)}; rho^2 recorded as 0")
            out.append((category_label(level), 0.0))
            continue
        out.append((category_label(level), rho_squared(full[mask], edf[mask])))
    return out


def category_label(level: Any) -> str:
    """Labels integer-valued categories without a decimal point."""
    if isinstance(level, (float, np.floating)) and float(level).is_integer():
        return str(int(level))
    return str(level)


def rho_headers(labels: Sequence[str]) -> List[str]:
    if len(labels) == 1:
        return ["rho^2"]
    return [f"{label} rho^2" for label in labels]


def format_utility(name: str, value: float) -> str:
    output = settings("EdfFair", "Output")
    decimals = int(output.get("mape_decimals", 2)) if name == MAPE else int(output.get("opm_decimals", 4))
    return f"{value:.{decimals}f}"


def format_rho(value: float) -> str:
    return f"{value:.{int(settings('EdfFair', 'Output').get('rho_decimals', 4))}f}"


def format_deweight(value: Any) -> str:
    if isinstance(value, dict):
        return ",".join(f"{k}={v:g}" for k, v in sorted(value.items()))
    return f"{float(value):.{int(settings('EdfFair', 'Output').get('deweight_decimals', 2))}f}"


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """
    Fixed-width table with " | " separators; the first column is left
    aligned, the rest right aligned.
    """
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]

    def line(cells: Sequence[str]) -> str:
        parts = [cells[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return " | ".join(parts).rstrip()

    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), rule] + [line(r) for r in rows]) + "\n"


def _paired(a: Any, b: Any) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise DataError("metric needs at least one value")
    return a, b


def _linear_probability(x_train: np.ndarray, s_train: np.ndarray, x_eval: np.ndarray) -> np.ndarray:
    # fitted values are unique even when one-hot groups make X'X singular
    x_mean = x_train.mean(axis=0)
    s_mean = float(s_train.mean())
    coef, _, _, _ = linalg.lstsq(x_train - x_mean, s_train - s_mean, check_finite=False)
    return np.clip(s_mean + (x_eval - x_mean) @ coef, 0.0, 1.0)
