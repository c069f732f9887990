"""
EDF Tabular Core Module

Data ingestion, one-hot encoding, standardization, holdout splitting and
proxy-feature ranking. Every model in the package consumes a Dataset.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import os

import numpy as np
import pandas as pd

from edf_fair.errors import ConfigError, DataError
from edf_fair.utils import get_logger, sha256_file

NUMERIC = "numeric"
CATEGORICAL = "categorical"
ONEHOT = "onehot"
FEATURE_KINDS = (NUMERIC, CATEGORICAL, ONEHOT)

CONTINUOUS = "continuous"
BINARY = "binary"

SeedLike = Union[int, np.random.SeedSequence, None]


@dataclass(frozen=True)
class FeatureColumn:
    """
    One encoded column: a numeric feature or a one-hot indicator of a categorical source.

    A two-valued numeric sensitive column recoded to 0/1 records its labels:
    category is the label mapped to 1, baseline the label mapped to 0.
    """

    name: str
    kind: str
    source: Optional[str] = None
    category: Optional[str] = None
    baseline: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "source": self.source, "category": self.category,
                "baseline": self.baseline}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "FeatureColumn":
        return cls(payload["name"], payload["kind"], payload.get("source"), payload.get("category"),
                   payload.get("baseline"))

    @property
    def recoded(self) -> bool:
        return self.kind == NUMERIC and self.category is not None and self.baseline is not None


@dataclass(frozen=True)
class FeatureSchema:
    """
    Ordered description of the encoded feature and sensitive columns.

    Attributes:
        columns: Columns of x, in order
        sensitive: Columns of s, in order (one-hot for categorical sensitive sources)
        sensitive_kinds: "continuous" or "binary" per sensitive column
        outcome: Name of the outcome column
        positive_label: Label mapped to 1 for binary outcomes ingested from labels
        source_kinds: Raw source column -> "numeric" | "categorical"
    """

    columns: Tuple[FeatureColumn, ...]
    sensitive: Tuple[FeatureColumn, ...] = ()
    sensitive_kinds: Tuple[str, ...] = ()
    outcome: str = "y"
    positive_label: Optional[str] = None
    source_kinds: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"Duplicate feature column names: {dupes}")
        for col in self.columns + self.sensitive:
            if col.kind not in FEATURE_KINDS:
                raise DataError(f"Column {col.name} has unknown kind {col.kind!r}")
            if col.kind == ONEHOT and (col.source is None or col.category is None):
                raise DataError(f"One-hot column {col.name} must record its source column and category")
        if len(self.sensitive_kinds) != len(self.sensitive):
            raise DataError("sensitive_kinds must have one entry per sensitive column")

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]

    @property
    def sensitive_names(self) -> List[str]:
        return [c.name for c in self.sensitive]

    @property
    def onehot_mask(self) -> np.ndarray:
        return np.array([c.kind == ONEHOT for c in self.columns], dtype=bool)

    def source_of(self, index: int) -> str:
        col = self.columns[index]
        return col.source if col.source is not None else col.name

    def onehot_groups(self) -> Dict[str, List[int]]:
        """Maps each categorical source column to the indices of its one-hot columns."""
        groups: Dict[str, List[int]] = {}
        for i, col in enumerate(self.columns):
            if col.kind == ONEHOT:
                groups.setdefault(col.source, []).append(i)
        return groups

    def indices_for(self, name: str) -> List[int]:
        """
        Resolves a feature name to column indices; a categorical source
        name resolves to all of its one-hot columns.
        """
        direct = [i for i, c in enumerate(self.columns) if c.name == name]
        if direct:
            return direct
        return [i for i, c in enumerate(self.columns) if c.source == name]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "columns": [c.to_dict() for c in self.columns],
            "sensitive": [c.to_dict() for c in self.sensitive],
            "sensitive_kinds": list(self.sensitive_kinds),
            "outcome": self.outcome,
            "positive_label": self.positive_label,
            "source_kinds": [list(p) for p in self.source_kinds],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "FeatureSchema":
        return cls(
            columns=tuple(FeatureColumn.from_dict(c) for c in payload["columns"]),
            sensitive=tuple(FeatureColumn.from_dict(c) for c in payload.get("sensitive", [])),
            sensitive_kinds=tuple(payload.get("sensitive_kinds", [])),
            outcome=payload.get("outcome", "y"),
            positive_label=payload.get("positive_label"),
            source_kinds=tuple(tuple(p) for p in payload.get("source_kinds", [])),
        )


@dataclass(frozen=True)
class Standardization:
    """Per-column (mean, standard deviation); one-hot columns carry (0, 1)."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, raw: np.ndarray, schema: FeatureSchema) -> "Standardization":
        """
        Estimates column statistics (sample sd, denominator n - 1).
        One-hot columns keep (0, 1); constant categoricals are caught at ingestion.

        Raises:
            DataError: If a numeric column is constant
        """
        raw = np.asarray(raw, dtype=float)
        mean = np.zeros(raw.shape[1])
        scale = np.ones(raw.shape[1])
        for j, col in enumerate(schema.columns):
            if col.kind == ONEHOT:
                continue
            sd = float(np.std(raw[:, j], ddof=1)) if raw.shape[0] > 1 else 0.0
            if not np.isfinite(sd) or sd == 0.0:
                raise DataError(f"Column {col.name} is constant (zero variance)")
            mean[j] = float(np.mean(raw[:, j]))
            scale[j] = sd
        return cls(_frozen(mean), _frozen(scale))

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.mean) / self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.mean

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Standardization":
        return cls(_frozen(np.asarray(payload["mean"], dtype=float)),
                   _frozen(np.asarray(payload["scale"], dtype=float)))


@dataclass(frozen=True)
class DataSource:
    """Where a Dataset came from and which roles its columns play."""

    path: str
    outcome: str
    sensitive: Tuple[str, ...]
    c_features: Tuple[str, ...]
    categorical: Tuple[str, ...] = ()
    features: Optional[Tuple[str, ...]] = None
    positive_label: Optional[str] = None
    sha256: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "path": self.path,
            "outcome": self.outcome,
            "sensitive": list(self.sensitive),
            "c_features": list(self.c_features),
            "categorical": list(self.categorical),
            "features": list(self.features) if self.features is not None else None,
            "positive_label": self.positive_label,
            "sha256": self.sha256,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], base_dir: Optional[str] = None) -> "DataSource":
        """
        Builds a DataSource from a JSON object; relative paths resolve against base_dir.

        Raises:
            ConfigError: If required keys are missing or mistyped
        """
        if not isinstance(payload, Mapping):
            raise ConfigError("'data' must be an object")
        for key in ("path", "outcome", "sensitive", "c_features"):
            if key not in payload:
                raise ConfigError(f"'data' is missing required key {key!r}")
        path = payload["path"]
        if not isinstance(path, str):
            raise ConfigError("'data.path' must be a string")
        if base_dir and not os.path.isabs(path):
            path = os.path.join(base_dir, path)

        def _names(key: str) -> Tuple[str, ...]:
            value = payload.get(key) or []
            if isinstance(value, str):
                value = [value]
            if not all(isinstance(v, str) for v in value):
                raise ConfigError(f"'data.{key}' must be a list of column names")
            return tuple(value)

        features = payload.get("features")
        positive = payload.get("positive_label")
        return cls(
            path=path,
            outcome=str(payload["outcome"]),
            sensitive=_names("sensitive"),
            c_features=_names("c_features"),
            categorical=_names("categorical"),
            features=_names("features") if features is not None else None,
            positive_label=str(positive) if positive is not None else None,
            sha256=payload.get("sha256"),
        )


@dataclass(frozen=True)
class Dataset:
    """
    Standardized design matrix plus outcome, sensitive attributes and the
    C-designation mask. Immutable: arrays are read-only.

    Attributes:
        x: (n, p) standardized features (one-hot columns stay 0/1)
        y: (n,) outcome, 0/1 when y_kind is "binary"
        y_kind: "continuous" or "binary"
        s: (n, q) sensitive attributes, never part of x
        schema: Column metadata
        c_mask: (p,) True for columns in the proxy set C
        standardization: Statistics used to standardize x
        source: Ingestion provenance, when loaded from a file
    """

    x: np.ndarray
    y: np.ndarray
    y_kind: str
    s: np.ndarray
    schema: FeatureSchema
    c_mask: np.ndarray
    standardization: Standardization
    source: Optional[DataSource] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1)
        c_mask = np.asarray(self.c_mask, dtype=bool)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"x must be a non-empty 2-D matrix, got shape {x.shape}")
        n, p = x.shape
        if n < 2:
            raise DataError(f"a Dataset needs at least 2 rows, got {n}")
        if y.shape != (n,):
            raise DataError(f"y has shape {y.shape}, expected ({n},)")
        if s.shape[0] != n:
            raise DataError(f"s has {s.shape[0]} rows, expected {n}")
        if c_mask.shape != (p,):
            raise DataError(f"c_mask has shape {c_mask.shape}, expected ({p},)")
        if len(self.schema.columns) != p:
            raise DataError(f"schema describes {len(self.schema.columns)} columns, x has {p}")
        if len(self.schema.sensitive) != s.shape[1]:
            raise DataError(f"schema describes {len(self.schema.sensitive)} sensitive columns, s has {s.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise DataError("x contains non-finite values")
        if not np.all(np.isfinite(y)):
            raise DataError("y contains non-finite values")
        if self.y_kind not in (CONTINUOUS, BINARY):
            raise DataError(f"y_kind must be 'continuous' or 'binary', got {self.y_kind!r}")
        if self.y_kind == BINARY and not np.all((y == 0.0) | (y == 1.0)):
            raise DataError("binary outcome must contain only 0 and 1")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "c_mask", _frozen(c_mask))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.s.shape[1]

    @property
    def feature_names(self) -> List[str]:
        return self.schema.names

    @property
    def sensitive_names(self) -> List[str]:
        return self.schema.sensitive_names

    def sensitive_kind(self, index: int) -> str:
        return self.schema.sensitive_kinds[index]

    def sensitive_basis(self) -> np.ndarray:
        """
        Indices of the sensitive columns that enter regressions on S. The last
        level of each one-hot expanded source is left out: once centered, a
        full block sums to zero and the remaining levels span the same space.
        """
        last: Dict[str, int] = {}
        for j, col in enumerate(self.schema.sensitive):
            if col.kind == ONEHOT:
                last[col.source] = j
        dropped = set(last.values())
        return np.array([j for j in range(self.q) if j not in dropped], dtype=int)

    def destandardize(self) -> np.ndarray:
        """Returns x on its raw scale."""
        return self.standardization.invert(self.x)

    def subset(self, rows: Sequence[int]) -> "Dataset":
        """Row subset sharing this Dataset's standardization."""
        rows = np.asarray(rows, dtype=int)
        return replace(self, x=self.x[rows], y=self.y[rows], s=self.s[rows])

    def with_outcome(self, y: np.ndarray, y_kind: str, outcome: str) -> "Dataset":
        """Same features with a different outcome vector (e.g. S as outcome for P(S=1|X))."""
        return replace(self, y=np.asarray(y, dtype=float), y_kind=y_kind,
                       schema=replace(self.schema, outcome=outcome, positive_label=None))

    def with_sensitive_features(self) -> "Dataset":
        """
        Returns a Dataset whose x also holds the sensitive columns
        (continuous ones standardized, 0/1 ones as-is), outside C. One-hot
        expanded sources contribute all levels but the last (see sensitive_basis).

        Only for the "full model with S" used by proxy-adequacy diagnostics.
        """
        basis = self.sensitive_basis()
        mean = np.zeros(basis.shape[0])
        scale = np.ones(basis.shape[0])
        columns = []
        for k, j in enumerate(basis):
            col = self.schema.sensitive[j]
            if self.schema.sensitive_kinds[j] == CONTINUOUS:
                mean[k] = float(np.mean(self.s[:, j]))
                sd = float(np.std(self.s[:, j], ddof=1)) if self.n > 1 else 0.0
                scale[k] = sd if sd > 0 else 1.0
            columns.append(FeatureColumn(col.name, NUMERIC, source=col.source or col.name))
        s_std = (self.s[:, basis] - mean) / scale
        schema = replace(self.schema, columns=self.schema.columns + tuple(columns))
        standardization = Standardization(
            _frozen(np.concatenate([self.standardization.mean, mean])),
            _frozen(np.concatenate([self.standardization.scale, scale])),
        )
        return replace(
            self,
            x=np.hstack([self.x, s_std]),
            schema=schema,
            c_mask=np.concatenate([self.c_mask, np.zeros(basis.shape[0], dtype=bool)]),
            standardization=standardization,
        )

    @classmethod
    def from_arrays(cls, x: Any, y: Any, s: Any, c_mask: Any,
                    feature_names: Optional[Sequence[str]] = None,
                    sensitive_names: Optional[Sequence[str]] = None,
                    y_kind: Optional[str] = None,
                    sensitive_kinds: Optional[Sequence[str]] = None) -> "Dataset":
        """
        Builds a Dataset from raw numeric arrays, standardizing every column of x.

        Args:
            x (Any): (n, p) raw features
            y (Any): (n,) outcome
            s (Any): (n,) or (n, q) sensitive attributes
            c_mask (Any): (p,) booleans designating C
            feature_names (Optional[Sequence[str]]): Defaults to x1..xp
            sensitive_names (Optional[Sequence[str]]): Defaults to s1..sq
            y_kind (Optional[str]): Inferred from y when None
            sensitive_kinds (Optional[Sequence[str]]): Inferred per column when None

        Returns:
            Dataset: Standardized dataset
        """
        raw = np.asarray(x, dtype=float)
        if raw.ndim == 1:
            raw = raw.reshape(-1, 1)
        s_arr = np.array(s, dtype=float)
        if s_arr.ndim == 1:
            s_arr = s_arr.reshape(-1, 1)
        y_arr = np.asarray(y, dtype=float)
        if raw.ndim != 2 or raw.shape[0] < 2 or raw.shape[1] < 1:
            raise DataError(f"need n >= 2 rows and p >= 1 columns, got shape {raw.shape}")
        if not np.all(np.isfinite(raw)):
            raise DataError("x contains non-finite values")
        if not np.all(np.isfinite(s_arr)):
            raise DataError("s contains non-finite values")
        p, q = raw.shape[1], s_arr.shape[1]
        names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(p)]
        s_names = list(sensitive_names) if sensitive_names is not None else [f"s{j + 1}" for j in range(q)]
        if len(names) != p or len(s_names) != q:
            raise DataError("feature_names / sensitive_names do not match the array shapes")
        if y_kind is None:
            y_kind = BINARY if _is_zero_one(y_arr) else CONTINUOUS
        s_columns = [FeatureColumn(nm, NUMERIC) for nm in s_names]
        if sensitive_kinds is None:
            sensitive_kinds = []
            for j in range(q):
                coded = _two_level_code(s_arr[:, j])
                if coded is not None and not _is_zero_one(s_arr[:, j]):
                    s_arr[:, j], baseline, positive = coded
                    s_columns[j] = FeatureColumn(s_names[j], NUMERIC, category=positive, baseline=baseline)
                sensitive_kinds.append(BINARY if coded is not None or _is_zero_one(s_arr[:, j]) else CONTINUOUS)
        schema = FeatureSchema(
            columns=tuple(FeatureColumn(nm, NUMERIC) for nm in names),
            sensitive=tuple(s_columns),
            sensitive_kinds=tuple(sensitive_kinds),
            source_kinds=tuple((nm, NUMERIC) for nm in names),
        )
        standardization = Standardization.fit(raw, schema)
        return cls(
            x=standardization.apply(raw),
            y=y_arr,
            y_kind=y_kind,
            s=s_arr,
            schema=schema,
            c_mask=np.asarray(c_mask, dtype=bool),
            standardization=standardization,
        )


@dataclass(frozen=True)
class DeweightSpec:
    """
    Per-feature deweighting hyperparameters.

    Attributes:
        ridge_d: d_i for the linear model (diagonal of D); zero off C
        factor: Multiplicative weight in [0, 1] for k-NN / forests; one off C
    """

    ridge_d: np.ndarray
    factor: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.ridge_d, dtype=float)
        f = np.asarray(self.factor, dtype=float)
        if d.ndim != 1 or f.shape != d.shape:
            raise ConfigError("ridge_d and factor must be vectors of equal length")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(f))):
            raise ConfigError("deweighting values must be finite")
        if np.any(d < 0):
            raise ConfigError("ridge d values must be nonnegative")
        if np.any((f < 0) | (f > 1)):
            raise ConfigError("deweight factors must lie in [0, 1]")
        object.__setattr__(self, "ridge_d", _frozen(d))
        object.__setattr__(self, "factor", _frozen(f))

    @property
    def p(self) -> int:
        return self.ridge_d.shape[0]

    def check(self, c_mask: np.ndarray) -> None:
        """
        Checks this DeweightSpec against a C mask: no deweighting outside C.

        Raises:
            ConfigError: On length mismatch or deweighting off C
        """
        c_mask = np.asarray(c_mask, dtype=bool)
        if c_mask.shape != self.ridge_d.shape:
            raise ConfigError(f"DeweightSpec has {self.p} entries, dataset has {c_mask.shape[0]} features")
        off = ~c_mask
        if np.any(self.ridge_d[off] != 0.0) or np.any(self.factor[off] != 1.0):
            raise ConfigError("deweighting is only allowed on features in C")

    @classmethod
    def none(cls, p: int) -> "DeweightSpec":
        return cls(np.zeros(p), np.ones(p))

    @classmethod
    def common(cls, c_mask: Any, delta: float = 0.0, factor: float = 1.0) -> "DeweightSpec":
        """
        Applies one value to every feature in C.

        Args:
            c_mask (Any): (p,) C designation
            delta (float): Ridge penalty on the d^2 scale (configs carry d^2)
            factor (float): k-NN / forest weight in [0, 1]
        """
        c_mask = np.asarray(c_mask, dtype=bool)
        d = np.where(c_mask, delta_to_d(delta), 0.0)
        f = np.where(c_mask, float(factor), 1.0)
        return cls(d, f)

    @classmethod
    def per_feature(cls, data: "Dataset", deltas: Optional[Mapping[str, float]] = None,
                    factors: Optional[Mapping[str, float]] = None) -> "DeweightSpec":
        """
        Sets values feature by feature; a categorical source name applies
        to all of its one-hot columns.

        Raises:
            ConfigError: For unknown names or names outside C
        """
        d = np.zeros(data.p)
        f = np.ones(data.p)
        for values, target, convert in ((deltas or {}, d, delta_to_d), (factors or {}, f, float)):
            for name, value in values.items():
                idx = data.schema.indices_for(name)
                if not idx:
                    raise ConfigError(f"Unknown feature {name!r} in per-feature deweighting")
                if not all(data.c_mask[i] for i in idx):
                    raise ConfigError(f"Feature {name!r} is not in C and cannot be deweighted")
                target[idx] = convert(value)
        return cls(d, f)


def delta_to_d(delta: float) -> float:
    """
    Converts a configured penalty delta = d^2 to the stored d.

    Raises:
        ConfigError: If delta is negative or not finite
    """
    delta = float(delta)
    if not np.isfinite(delta) or delta < 0:
        raise ConfigError(f"ridge deweighting value must be a finite nonnegative d^2, got {delta}")
    return float(np.sqrt(delta))


def load_csv(path: str, outcome: str, sensitive: Sequence[str], c_features: Sequence[str],
             categorical: Optional[Sequence[str]] = None, features: Optional[Sequence[str]] = None,
             positive_label: Optional[str] = None) -> Dataset:
    """
    Reads a CSV and builds a standardized Dataset.

    Args:
        path (str): CSV path (UTF-8, header row)
        outcome (str): Outcome column
        sensitive (Sequence[str]): Sensitive columns, excluded from x
        c_features (Sequence[str]): Source columns forming C
        categorical (Optional[Sequence[str]]): Columns to one-hot encode even if numeric
        features (Optional[Sequence[str]]): Feature columns (default: all remaining)
        positive_label (Optional[str]): Outcome label mapped to 1

    Returns:
        Dataset: Encoded, standardized dataset with provenance recorded
    """
    frame = read_csv(path)

    source = DataSource(
        path=path,
        outcome=outcome,
        sensitive=tuple(sensitive),
        c_features=tuple(c_features),
        categorical=tuple(categorical or ()),
        features=tuple(features) if features is not None else None,
        positive_label=positive_label,
        sha256=sha256_file(path),
    )
    return from_frame(frame, source)


def read_csv(path: str) -> pd.DataFrame:
    """
    Reads a UTF-8 CSV with a header row.

    Raises:
        DataError: If the file is missing or cannot be parsed
    """
    logger = get_logger("Tabular")
    if not os.path.isfile(path):
        raise DataError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Could not parse CSV {path}: {e}") from e
    logger.info(f"Read {len(frame)} rows x {len(frame.columns)} columns from {path}")
    return frame


def load_source(source: DataSource) -> Dataset:
    """Loads the CSV a DataSource points at, with the roles it records."""
    return load_csv(source.path, source.outcome, source.sensitive, source.c_features,
                    categorical=source.categorical, features=source.features,
                    positive_label=source.positive_label)


def from_frame(frame: pd.DataFrame, source: DataSource) -> Dataset:
    """
    Encodes a DataFrame according to the roles in a DataSource.

    Args:
        frame (pd.DataFrame): Raw table
        source (DataSource): Column roles

    Returns:
        Dataset: Encoded, standardized dataset
    """
    logger = get_logger("Tabular")
    sensitive = list(source.sensitive)
    c_features = list(source.c_features)
    categorical = set(source.categorical)

    missing = [c for c in [source.outcome] + sensitive + c_features + list(categorical) if c not in frame.columns]
    if source.features is not None:
        missing += [c for c in source.features if c not in frame.columns]
    if missing:
        raise DataError(f"Missing column(s): {', '.join(dict.fromkeys(missing))}")
    overlap = sorted(set(sensitive) & set(c_features))
    if overlap:
        raise DataError(f"Sensitive column(s) {overlap} listed among c_features: S must be excluded from X")
    if source.outcome in sensitive or source.outcome in c_features:
        raise DataError(f"Outcome column {source.outcome} cannot also be sensitive or in C")

    if source.features is not None:
        features = [c for c in source.features if c != source.outcome and c not in sensitive]
    else:
        features = [c for c in frame.columns if c != source.outcome and c not in sensitive]
    stray = [c for c in c_features if c not in features]
    if stray:
        raise DataError(f"c_features {stray} are not among the feature columns")
    if not features:
        raise DataError("No feature columns left after removing outcome and sensitive columns")
    if len(frame) < 2:
        raise DataError(f"Need at least 2 rows, got {len(frame)}")

    used = [source.outcome] + sensitive + features
    nulls = [c for c in used if frame[c].isna().any()]
    if nulls:
        raise DataError(f"Missing values in column(s): {', '.join(nulls)}")

    columns: List[FeatureColumn] = []
    blocks: List[np.ndarray] = []
    source_kinds: List[Tuple[str, str]] = []
    for name in features:
        series = frame[name]
        if name in categorical or not _is_numeric(series):
            cols, block = _onehot(series, name)
            if len(cols) < 2:
                raise DataError(f"Column {name} is constant (zero variance)")
            columns.extend(cols)
            blocks.append(block)
            source_kinds.append((name, CATEGORICAL))
        else:
            values = _finite_numeric(series, name)
            columns.append(FeatureColumn(name, NUMERIC))
            blocks.append(values.reshape(-1, 1))
            source_kinds.append((name, NUMERIC))
    raw = np.hstack(blocks)

    s_columns: List[FeatureColumn] = []
    s_kinds: List[str] = []
    s_blocks: List[np.ndarray] = []
    for name in sensitive:
        series = frame[name]
        if name in categorical or not _is_numeric(series):
            cols, block = _onehot(series, name)
            if len(cols) < 2:
                raise DataError(f"Sensitive column {name} has a single value")
            s_columns.extend(cols)
            s_kinds.extend([BINARY] * len(cols))
            s_blocks.append(block)
        else:
            values = _finite_numeric(series, name)
            coded = _two_level_code(values)
            if coded is not None and not _is_zero_one(values):
                values, baseline, positive = coded
                logger.info(f"Sensitive column {name} recoded to 0/1: {baseline} -> 0, {positive} -> 1")
                s_columns.append(FeatureColumn(name, NUMERIC, category=positive, baseline=baseline))
            else:
                s_columns.append(FeatureColumn(name, NUMERIC))
            s_kinds.append(BINARY if coded is not None or _is_zero_one(values) else CONTINUOUS)
            s_blocks.append(values.reshape(-1, 1))
    s = np.hstack(s_blocks) if s_blocks else np.zeros((len(frame), 0))

    y, y_kind, positive = _encode_outcome(frame[source.outcome], source.outcome, source.positive_label)

    schema = FeatureSchema(
        columns=tuple(columns),
        sensitive=tuple(s_columns),
        sensitive_kinds=tuple(s_kinds),
        outcome=source.outcome,
        positive_label=positive,
        source_kinds=tuple(source_kinds),
    )
    standardization = Standardization.fit(raw, schema)
    c_set = set(c_features)
    c_mask = np.array([schema.source_of(i) in c_set for i in range(len(columns))], dtype=bool)
    logger.debug(f"Encoded {len(features)} source columns into p={len(columns)}; |C|={int(c_mask.sum())}, q={s.shape[1]}")
    return Dataset(
        x=standardization.apply(raw),
        y=y,
        y_kind=y_kind,
        s=s,
        schema=schema,
        c_mask=c_mask,
        standardization=standardization,
        source=source,
    )


def encode_frame(frame: pd.DataFrame, schema: FeatureSchema, standardization: Standardization,
                 require_sensitive: bool = False,
                 require_outcome: bool = False) -> Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    """
    Applies a stored schema and standardization to new rows.

    Args:
        frame (pd.DataFrame): Raw rows
        schema (FeatureSchema): Schema recorded at fit time
        standardization (Standardization): Training statistics
        require_sensitive (bool): Fail if sensitive columns are absent
        require_outcome (bool): Fail if the outcome column is absent

    Returns:
        Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]: (x, s, y); s / y None when absent
    """
    x = _encode_columns(frame, schema.columns, "feature")
    s = None
    s_sources = {c.source or c.name for c in schema.sensitive}
    if s_sources and all(src in frame.columns for src in s_sources):
        s = _encode_columns(frame, schema.sensitive, "sensitive")
    elif require_sensitive:
        absent = sorted(src for src in s_sources if src not in frame.columns)
        raise DataError(f"Missing sensitive column(s): {', '.join(absent)}")
    y = None
    if schema.outcome in frame.columns:
        if frame[schema.outcome].isna().any():
            raise DataError(f"Missing values in column(s): {schema.outcome}")
        series = frame[schema.outcome]
        if schema.positive_label is not None:
            y = (_labels(series) == schema.positive_label).astype(float)
        else:
            y = _finite_numeric(series, schema.outcome)
    elif require_outcome:
        raise DataError(f"Missing column(s): {schema.outcome}")
    return standardization.apply(x), s, y


def split_holdout(data: Dataset, holdout_size: int, seed: SeedLike) -> Tuple[Dataset, Dataset]:
    """
    Uniform random train/test partition. Train statistics are recomputed on
    the train rows and applied to both parts.

    Args:
        data (Dataset): Full dataset
        holdout_size (int): Number of test rows
        seed (SeedLike): RNG seed; equal seeds give equal partitions

    Returns:
        Tuple[Dataset, Dataset]: (train, test)
    """
    if isinstance(holdout_size, bool) or not isinstance(holdout_size, (int, np.integer)) or holdout_size < 2:
        raise ConfigError(f"holdout_size must be an integer >= 2, got {holdout_size!r}")
    if holdout_size > data.n - 2:
        raise DataError(f"holdout_size {holdout_size} leaves fewer than 2 training rows (n={data.n})")

    rng = np.random.default_rng(seed)
    test_rows = np.sort(rng.choice(data.n, size=int(holdout_size), replace=False))
    train_mask = np.ones(data.n, dtype=bool)
    train_mask[test_rows] = False
    train_rows = np.flatnonzero(train_mask)

    raw = data.destandardize()
    standardization = Standardization.fit(raw[train_rows], data.schema)
    x = standardization.apply(raw)
    rebased = replace(data, x=x, standardization=standardization)
    return rebased.subset(train_rows), rebased.subset(test_rows)


def rank_proxy_features(data: Dataset, sensitive_index: int) -> List[Tuple[str, float]]:
    """
    Ranks features by squared sample correlation with one sensitive column.
    Advisory only: the user still designates C.

    Args:
        data (Dataset): Dataset
        sensitive_index (int): Column of s

    Returns:
        List[Tuple[str, float]]: (feature name, score) sorted by descending score
    """
    if not isinstance(sensitive_index, (int, np.integer)) or not 0 <= sensitive_index < data.q:
        raise ConfigError(f"sensitive_index {sensitive_index!r} out of range for q={data.q}")
    if data.n < 3:
        raise DataError(f"Need at least 3 rows to rank proxies, got {data.n}")
    s = data.s[:, sensitive_index]
    sc = s - s.mean()
    s_norm = float(np.sqrt(sc @ sc))
    if s_norm == 0.0:
        raise DataError(f"Sensitive column {data.sensitive_names[sensitive_index]} is constant")
    xc = data.x - data.x.mean(axis=0)
    x_norm = np.sqrt(np.einsum("ij,ij->j", xc, xc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (xc.T @ sc) / (x_norm * s_norm)
    scores = np.clip(np.nan_to_num(r * r, nan=0.0), 0.0, 1.0)
    order = sorted(range(data.p), key=lambda j: (-scores[j], j))
    return [(data.feature_names[j], float(scores[j])) for j in order]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _is_numeric(series: pd.Series) -> bool:
    return pd.api.types.is_numeric_dtype(series) and not pd.api.types.is_bool_dtype(series)


def _is_zero_one(values: np.ndarray) -> bool:
    values = np.asarray(values, dtype=float)
    return values.size > 0 and bool(np.all((values == 0.0) | (values == 1.0)))


def _two_level_code(values: np.ndarray) -> Optional[Tuple[np.ndarray, str, str]]:
    """
    0/1 coding of a column with exactly two distinct values, the larger one
    mapped to 1. Returns (coded, baseline label, positive label), or None.
    """
    levels = np.unique(values)
    if levels.shape[0] != 2:
        return None
    baseline, positive = _labels(pd.Series(levels)).tolist()
    return (values == levels[1]).astype(float), baseline, positive


def _finite_numeric(series: pd.Series, name: str) -> np.ndarray:
    try:
        values = pd.to_numeric(series, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise DataError(f"Column {name} is not numeric: {e}") from e
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise DataError(f"Non-finite value in column {name} at row {bad}")
    return values


def _labels(series: pd.Series) -> np.ndarray:
    """String labels; integer-valued numbers print without a decimal point."""
    if _is_numeric(series):
        values = series.to_numpy(dtype=float)
        return np.array([str(int(v)) if float(v).is_integer() else str(float(v)) for v in values], dtype=object)
    return series.astype(str).to_numpy(dtype=object)


def _level_order(series: pd.Series, labels: np.ndarray) -> List[str]:
    levels = list(dict.fromkeys(labels.tolist()))
    if _is_numeric(series):
        return sorted(levels, key=float)
    return sorted(levels)


def _onehot(series: pd.Series, name: str) -> Tuple[List[FeatureColumn], np.ndarray]:
    labels = _labels(series)
    levels = _level_order(series, labels)
    cols = [FeatureColumn(f"{name}.{lvl}", ONEHOT, source=name, category=lvl) for lvl in levels]
    block = np.column_stack([(labels == lvl).astype(float) for lvl in levels])
    return cols, block


def _encode_columns(frame: pd.DataFrame, columns: Sequence[FeatureColumn], role: str) -> np.ndarray:
    out = np.empty((len(frame), len(columns)))
    label_cache: Dict[str, np.ndarray] = {}
    known: Dict[str, set] = {}
    for col in columns:
        if col.kind == ONEHOT:
            known.setdefault(col.source, set()).add(col.category)
    for j, col in enumerate(columns):
        src = col.source or col.name
        if src not in frame.columns:
            raise DataError(f"Missing {role} column: {src}")
        if frame[src].isna().any():
            raise DataError(f"Missing values in column(s): {src}")
        if col.kind == ONEHOT:
            if src not in label_cache:
                label_cache[src] = _labels(frame[src])
                unseen = sorted(set(label_cache[src].tolist()) - known[src])
                if unseen:
                    raise DataError(f"Column {src} has categories not seen in training: {unseen}")
            out[:, j] = (label_cache[src] == col.category).astype(float)
        elif col.recoded:
            labels = _labels(frame[src])
            unseen = sorted(set(labels.tolist()) - {col.baseline, col.category})
            if unseen:
                raise DataError(f"Column {src} has values not seen in training: {unseen}")
            out[:, j] = (labels == col.category).astype(float)
        else:
            out[:, j] = _finite_numeric(frame[src], src)
    return out


def _encode_outcome(series: pd.Series, name: str,
                    positive_label: Optional[str]) -> Tuple[np.ndarray, str, Optional[str]]:
    if positive_label is not None:
        labels = _labels(series)
        levels = set(labels.tolist())
        if positive_label not in levels:
            raise DataError(f"positive_label {positive_label!r} does not occur in outcome {name}")
        if len(levels) != 2:
            raise DataError(f"Outcome {name} must be two-valued to set positive_label, found {len(levels)} values")
        return (labels == positive_label).astype(float), BINARY, positive_label
    if _is_numeric(series):
        values = _finite_numeric(series, name)
        return values, (BINARY if _is_zero_one(values) else CONTINUOUS), None
    labels = _labels(series)
    levels = sorted(set(labels.tolist()))
    if len(levels) != 2:
        raise DataError(f"Categorical outcome {name} must have exactly two values, found {len(levels)}")
    positive = levels[-1]
    return (labels == positive).astype(float), BINARY, positive
