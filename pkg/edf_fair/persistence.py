"""
EDF Model Persistence Module

Fit descriptions (JSON in) and model bundles (JSON out). A bundle holds
the fitted model together with the feature schema, standardization and
C mask it was trained under, so new CSV rows can be encoded exactly as
the training rows were. k-NN bundles carry no training rows: they
reference the training CSV by path and SHA-256 and re-ingest it on load.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple, Union
import os

import numpy as np
import pandas as pd

from edf_fair.errors import ConfigError, DataError, EdfError
from edf_fair.forest import ForestModel
from edf_fair.harness import (
    FAMILIES, FAMILY_PARAMS, FOREST, KNN, LINEAR, TWOSTAGE, GridValue, check_grid_value, fit_family,
)
from edf_fair.knn import KnnModel
from edf_fair.linear import RidgeDeweightModel
from edf_fair.tabular import (
    BINARY, DataSource, Dataset, FeatureSchema, Standardization, encode_frame, load_source,
)
from edf_fair.twostage import TwoStageModel
from edf_fair.utils import dumps_canonical, get_logger, read_json, settings

BUNDLE_FORMAT = "edf-fair-model"
BUNDLE_VERSION = 1

FIT_KEYS = ("data", "family", "family_params", "deweight", "seed")


@dataclass(frozen=True)
class FitConfig:
    """
    Single-model fit description.

    Attributes:
        data: Training CSV and column roles
        family: Model family
        deweight: delta = d^2, factor, lambda, or a per-feature mapping
        family_params: Family hyperparameters
        seed: Forest seed
    """

    data: DataSource
    family: str
    deweight: GridValue = 0.0
    family_params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        object.__setattr__(self, "deweight", check_grid_value(self.family, self.deweight))
        unknown = sorted(set(self.family_params) - set(FAMILY_PARAMS[self.family]))
        if unknown:
            raise ConfigError(f"family_params {unknown} do not apply to family {self.family!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], base_dir: Optional[str] = None) -> "FitConfig":
        if not isinstance(payload, Mapping):
            raise ConfigError("fit config must be a JSON object")
        unknown = sorted(set(payload) - set(FIT_KEYS))
        if unknown:
            raise ConfigError(f"Unknown fit config key(s): {unknown}")
        for key in ("data", "family"):
            if key not in payload:
                raise ConfigError(f"fit config is missing required key {key!r}")
        if payload["family"] in (KNN, FOREST):
            default = 1.0
        elif payload["family"] == TWOSTAGE:
            default = float(settings("EdfFair", "TwoStage").get("lambda", 0.0))
        else:
            default = 0.0
        params = payload.get("family_params") or {}
        if not isinstance(params, Mapping):
            raise ConfigError("family_params must be an object")
        return cls(
            data=DataSource.from_dict(payload["data"], base_dir),
            family=payload["family"],
            deweight=payload.get("deweight", default),
            family_params=dict(params),
            seed=payload.get("seed", 0),
        )

    @classmethod
    def from_json(cls, path: str) -> "FitConfig":
        return cls.from_dict(read_json(path), base_dir=os.path.dirname(os.path.abspath(path)))


@dataclass(frozen=True)
class ModelBundle:
    """Fitted model plus everything needed to encode new rows for it."""

    family: str
    model: Any
    schema: FeatureSchema
    standardization: Standardization
    c_mask: np.ndarray
    deweight: GridValue
    source: Optional[DataSource] = None

    @property
    def y_kind(self) -> str:
        return self.model.y_kind

    def encode_rows(self, frame: pd.DataFrame, require_outcome: bool = False,
                    require_sensitive: bool = False) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Encodes raw rows with the stored schema and standardization.

        Missing sensitive columns become zeros unless they are required
        (two-stage models always need them). A missing outcome becomes zeros
        unless required.

        Returns:
            Tuple[np.ndarray, np.ndarray, np.ndarray]: (x, s, y)
        """
        need_s = require_sensitive or self.family == TWOSTAGE
        x, s, y = encode_frame(frame, self.schema, self.standardization,
                               require_sensitive=need_s, require_outcome=require_outcome)
        m = x.shape[0]
        if m == 0:
            raise DataError("no rows to encode")
        if s is None:
            s = np.zeros((m, len(self.schema.sensitive)))
        if y is None:
            y = np.zeros(m)
        if self.y_kind == BINARY and not np.all((y == 0.0) | (y == 1.0)):
            raise DataError(f"outcome {self.schema.outcome} must be 0/1 for a model fitted on a binary outcome")
        return x, s, y

    def dataset_from_frame(self, frame: pd.DataFrame, require_outcome: bool = False,
                           require_sensitive: bool = False) -> Dataset:
        """encode_rows wrapped in a Dataset (at least 2 rows)."""
        x, s, y = self.encode_rows(frame, require_outcome, require_sensitive)
        return Dataset(x=x, y=y, y_kind=self.y_kind, s=s, schema=self.schema,
                       c_mask=self.c_mask, standardization=self.standardization)

    def predict_frame(self, frame: pd.DataFrame) -> np.ndarray:
        """Predicted Y (continuous) or P(Y = 1 | X) (binary) for raw rows, one row included."""
        x, s, _ = self.encode_rows(frame)
        if self.family == TWOSTAGE:
            pred = self.model.predict_sfree(x, s, include_sensitive=self.model.include_sensitive)
            return np.clip(pred, 0.0, 1.0) if self.y_kind == BINARY else pred
        if self.y_kind == BINARY:
            return self.model.predict_proba(x)[:, 1]
        return self.model.predict(x)

    def training_data(self) -> Dataset:
        """
        Re-ingests the training CSV recorded in the bundle.

        Raises:
            DataError: If the file is gone or its checksum changed
        """
        if self.source is None:
            raise DataError("model bundle records no training data")
        data = load_source(self.source)
        if self.source.sha256 and data.source is not None and data.source.sha256 != self.source.sha256:
            raise DataError(f"training data {self.source.path} changed since the model was fitted (sha256 mismatch)")
        return data

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "family": self.family,
            "deweight": self.deweight,
            "model": self.model.to_dict(),
            "schema": self.schema.to_dict(),
            "standardization": self.standardization.to_dict(),
            "c_mask": [bool(v) for v in self.c_mask],
            "training_data": None if self.source is None else self.source.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ModelBundle":
        if payload.get("format") != BUNDLE_FORMAT:
            raise ConfigError("not an EDF model bundle")
        if payload.get("version") != BUNDLE_VERSION:
            raise ConfigError(f"unsupported model bundle version {payload.get('version')!r}")
        family = payload["family"]
        source = None
        if payload.get("training_data") is not None:
            source = DataSource.from_dict(payload["training_data"])
        base = cls(
            family=family,
            model=None,
            schema=FeatureSchema.from_dict(payload["schema"]),
            standardization=Standardization.from_dict(payload["standardization"]),
            c_mask=np.asarray(payload["c_mask"], dtype=bool),
            deweight=payload.get("deweight", 0.0),
            source=source,
        )
        if family == LINEAR:
            model = RidgeDeweightModel.from_dict(payload["model"])
        elif family == TWOSTAGE:
            model = TwoStageModel.from_dict(payload["model"])
        elif family == FOREST:
            model = ForestModel.from_dict(payload["model"])
        elif family == KNN:
            model = KnnModel.from_dict(payload["model"], base.training_data())
        else:
            raise ConfigError(f"unknown model family {family!r} in bundle")
        return ModelBundle(family, model, base.schema, base.standardization, base.c_mask, base.deweight, source)


def fit_model(fit_config: FitConfig, data: Optional[Dataset] = None) -> ModelBundle:
    """
    Fits one model on all rows of the configured data.

    Args:
        fit_config (FitConfig): Fit description
        data (Optional[Dataset]): Preloaded data (default: load fit_config.data)

    Returns:
        ModelBundle: Bundle ready to save
    """
    logger = get_logger("Persistence")
    if data is None:
        data = load_source(fit_config.data)
    model = fit_family(fit_config.family, data, fit_config.deweight, fit_config.family_params, fit_config.seed)
    logger.info(f"Fitted {fit_config.family} model on n={data.n}, p={data.p}")
    return ModelBundle(
        family=fit_config.family,
        model=model,
        schema=data.schema,
        standardization=data.standardization,
        c_mask=np.array(data.c_mask),
        deweight=fit_config.deweight,
        source=data.source,
    )


def save_model(bundle: ModelBundle, path: str) -> str:
    """Writes a bundle as canonical JSON; returns the path."""
    if bundle.family == KNN and bundle.source is None:
        raise DataError("k-NN bundles need a file-backed training dataset")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_canonical(bundle.to_dict()) + "\n")
    return path


def load_model(path: str) -> ModelBundle:
    """
    Reads a bundle written by save_model.

    Raises:
        ConfigError: If the file is not a readable bundle
    """
    payload = read_json(path)
    try:
        return ModelBundle.from_dict(payload)
    except EdfError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed model bundle {path}: {e}") from e


def write_predictions(values: Union[np.ndarray, list], path: Optional[str], column: str = "prediction") -> str:
    """
    Single-column CSV with a header; returns the CSV text (also written when path is given).
    """
    frame = pd.DataFrame({column: np.asarray(values, dtype=float)})
    text = frame.to_csv(index=False, float_format="%.10g", lineterminator="\n")
    if path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return text
