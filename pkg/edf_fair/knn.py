"""
EDF k-NN Module

Brute-force k-nearest-neighbor regression / classification under the
weighted metric

    d(a, b) = sqrt(sum_i w_i (a_i - b_i)^2),   w_i in [0, 1]

where C coordinates carry the deweight factor. A weight of 0 removes the
coordinate from the metric exactly.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

import numpy as np

from edf_fair.errors import ConfigError, DataError
from edf_fair.tabular import BINARY, Dataset, DeweightSpec
from edf_fair.utils import as_query_matrix, get_logger, settings


@dataclass(frozen=True)
class KnnModel:
    """
    Stored training data plus metric weights.

    Attributes:
        k: Number of neighbors
        weights: Per-coordinate weights (DeweightSpec.factor)
        train_x: (n, p) standardized training features
        train_y: (n,) training outcome
        y_kind: "continuous" or "binary"
        chunk_size: Queries per distance block
    """

    k: int
    weights: np.ndarray
    train_x: np.ndarray
    train_y: np.ndarray
    y_kind: str
    chunk_size: int = 256

    family = "knn"

    @property
    def n(self) -> int:
        return self.train_x.shape[0]

    @property
    def p(self) -> int:
        return self.train_x.shape[1]

    def squared_distances(self, queries: np.ndarray) -> np.ndarray:
        """
        Weighted squared distances, (m, n). Coordinates are accumulated one
        at a time in index order and zero-weight coordinates are skipped, so
        the result equals the computation on the column-deleted data bit for bit.
        """
        out = np.zeros((queries.shape[0], self.n))
        for j in range(self.p):
            w = self.weights[j]
            if w == 0.0:
                continue
            diff = queries[:, j][:, None] - self.train_x[:, j][None, :]
            out += w * (diff * diff)
        return out

    def kneighbors(self, x_new: Any, threads: int = 1) -> np.ndarray:
        """
        Indices of the k nearest training rows per query; ties at equal
        distance go to the lowest training-row index.

        Args:
            x_new (Any): p-vector or (m, p) matrix
            threads (int): Worker threads over query chunks

        Returns:
            np.ndarray: (m, k) integer indices, nearest first
        """
        queries = as_query_matrix(x_new, self.p)
        starts = list(range(0, queries.shape[0], self.chunk_size))

        def block(start: int) -> np.ndarray:
            d2 = self.squared_distances(queries[start:start + self.chunk_size])
            return np.argsort(d2, axis=1, kind="stable")[:, :self.k]

        if threads > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=min(threads, len(starts))) as executor:
                blocks = list(executor.map(block, starts))
        else:
            blocks = [block(start) for start in starts]
        if not blocks:
            return np.zeros((0, self.k), dtype=int)
        return np.vstack(blocks)

    def predict(self, x_new: Any, threads: int = 1) -> np.ndarray:
        """Mean of the neighbors' y."""
        idx = self.kneighbors(x_new, threads)
        return self.train_y[idx].mean(axis=1)

    def predict_proba(self, x_new: Any, threads: int = 1) -> np.ndarray:
        """
        Neighbor class frequencies for 0/1 outcomes.

        Returns:
            np.ndarray: (m, 2) columns P(Y=0), P(Y=1); each a multiple of 1/k
        """
        if self.y_kind != BINARY:
            raise DataError("knn_predict_proba requires a binary outcome")
        idx = self.kneighbors(x_new, threads)
        ones = self.train_y[idx].sum(axis=1)
        return np.column_stack([(self.k - ones) / self.k, ones / self.k])

    def conditional_mean(self, data: Dataset) -> np.ndarray:
        return self.predict(data.x)

    def to_dict(self) -> Dict[str, Any]:
        """Hyperparameters only; the training data travels as a file reference."""
        return {"k": int(self.k), "weights": self.weights.tolist(), "y_kind": self.y_kind,
                "chunk_size": int(self.chunk_size)}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], train: Dataset) -> "KnnModel":
        spec = DeweightSpec(np.zeros(train.p), np.asarray(payload["weights"], dtype=float))
        model = knn_fit(train, spec, int(payload["k"]), chunk_size=payload.get("chunk_size"))
        if model.y_kind != payload.get("y_kind", model.y_kind):
            raise DataError("training data outcome kind does not match the stored k-NN model")
        return model


def weighted_distance(a: Any, b: Any, weights: Any) -> float:
    """
    sqrt(sum_i weights_i (a_i - b_i)^2).

    Args:
        a (Any): p-vector
        b (Any): p-vector
        weights (Any): p nonnegative weights

    Returns:
        float: Nonnegative, symmetric distance
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.asarray(weights, dtype=float)
    if a.shape != b.shape or a.shape != w.shape:
        raise DataError(f"shape mismatch: {a.shape}, {b.shape}, weights {w.shape}")
    diff = a - b
    return float(np.sqrt(np.sum(w * diff * diff)))


def knn_fit(train: Dataset, spec: DeweightSpec, k: Optional[int] = None,
            chunk_size: Optional[int] = None) -> KnnModel:
    """
    Stores the training data with the deweighted metric. Duplicate rows are kept.

    Args:
        train (Dataset): Training data
        spec (DeweightSpec): factor supplies the coordinate weights
        k (Optional[int]): Neighbors (default from [EdfFair.Knn], 25)
        chunk_size (Optional[int]): Queries per distance block

    Returns:
        KnnModel: Model ready for prediction
    """
    logger = get_logger("Knn")
    knn_settings = settings("EdfFair", "Knn")
    if k is None:
        k = int(knn_settings.get("k", 25))
    if chunk_size is None:
        chunk_size = int(knn_settings.get("chunk_size", 256))
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    if k > train.n:
        raise ConfigError(f"k={k} exceeds the number of training rows ({train.n})")
    if chunk_size < 1:
        raise ConfigError(f"chunk_size must be positive, got {chunk_size}")
    spec.check(train.c_mask)
    logger.debug(f"k-NN fit: n={train.n}, p={train.p}, k={k}, weights on C={spec.factor[train.c_mask].tolist()}")
    return KnnModel(
        k=int(k),
        weights=np.array(spec.factor, dtype=float),
        train_x=train.x,
        train_y=train.y,
        y_kind=train.y_kind,
        chunk_size=int(chunk_size),
    )


def knn_predict(model: KnnModel, x_new: Any) -> np.ndarray:
    """Neighbor mean of y for each query."""
    return model.predict(x_new)


def knn_predict_proba(model: KnnModel, x_new: Any) -> np.ndarray:
    """Neighbor class frequencies, (m, 2)."""
    return model.predict_proba(x_new)
