"""
EDF Random Forest Module

Random forests whose split-candidate sampling is deweighted for C: at each
node, mtry candidate features are drawn without replacement with
probability proportional to their sampling weights (sequential draws over
the remaining weight). A feature with weight 0 is never a candidate.

Trees are CART trees on bootstrap samples: variance reduction for
continuous outcomes, Gini decrease for 0/1 outcomes, thresholds at
midpoints between sorted distinct values, x <= threshold goes left.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import math

import numpy as np

from edf_fair.errors import ConfigError, DataError
from edf_fair.tabular import BINARY, Dataset, DeweightSpec
from edf_fair.utils import as_query_matrix, get_logger, settings

LEAF = -1

# Minimum impurity decrease, relative to the node's own impurity, for a split to count
MIN_RELATIVE_GAIN = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    """
    Forest hyperparameters.

    Attributes:
        n_trees: Number of trees (default 500)
        min_node_size: Nodes with at most this many rows become leaves (default 10)
        mtry: Candidates per node (default ceil(sqrt(p)))
        sampling_weights: Per-feature candidate weights (None = all ones)
        seed: Master seed; tree t uses the t-th spawned stream
        bootstrap: Sample n rows with replacement per tree
        n_jobs: Worker threads; results do not depend on it
    """

    n_trees: int = 500
    min_node_size: int = 10
    mtry: Optional[int] = None
    sampling_weights: Optional[Tuple[float, ...]] = None
    seed: int = 0
    bootstrap: bool = True
    n_jobs: int = field(default=1, compare=False)

    def __post_init__(self) -> None:
        for name in ("n_trees", "min_node_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.mtry is not None and (isinstance(self.mtry, bool) or not isinstance(self.mtry, (int, np.integer)) or self.mtry < 1):
            raise ConfigError(f"mtry must be a positive integer, got {self.mtry!r}")
        if self.sampling_weights is not None:
            w = np.asarray(self.sampling_weights, dtype=float)
            if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ConfigError("sampling_weights must be finite and nonnegative")
            if not np.any(w > 0):
                raise ConfigError("at least one sampling weight must be positive")
            object.__setattr__(self, "sampling_weights", tuple(float(v) for v in w))
        if self.n_jobs < 1:
            raise ConfigError(f"n_jobs must be positive, got {self.n_jobs}")

    @classmethod
    def from_settings(cls, spec: Optional[DeweightSpec] = None, **overrides: Any) -> "ForestConfig":
        """
        Builds a config from [EdfFair.Forest] defaults, optional overrides and
        a DeweightSpec whose factor becomes the sampling weights.
        """
        defaults = settings("EdfFair", "Forest")
        values: Dict[str, Any] = {
            "n_trees": int(defaults.get("n_trees", 500)),
            "min_node_size": int(defaults.get("min_node_size", 10)),
            "bootstrap": bool(defaults.get("bootstrap", True)),
        }
        if defaults.get("mtry") is not None:
            values["mtry"] = int(defaults["mtry"])
        values.update({k: v for k, v in overrides.items() if v is not None})
        if spec is not None:
            values["sampling_weights"] = tuple(spec.factor.tolist())
        return cls(**values)

    def resolve(self, p: int) -> "ForestConfig":
        """Fills mtry / sampling_weights for p features and validates them."""
        weights = self.sampling_weights if self.sampling_weights is not None else tuple([1.0] * p)
        if len(weights) != p:
            raise ConfigError(f"sampling_weights has {len(weights)} entries, data has {p} features")
        mtry = self.mtry if self.mtry is not None else int(math.ceil(math.sqrt(p)))
        if mtry > p:
            raise ConfigError(f"mtry={mtry} exceeds the number of features ({p})")
        return replace(self, mtry=mtry, sampling_weights=weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_trees": int(self.n_trees),
            "min_node_size": int(self.min_node_size),
            "mtry": None if self.mtry is None else int(self.mtry),
            "sampling_weights": None if self.sampling_weights is None else list(self.sampling_weights),
            "seed": int(self.seed),
            "bootstrap": bool(self.bootstrap),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ForestConfig":
        weights = payload.get("sampling_weights")
        return cls(
            n_trees=int(payload["n_trees"]),
            min_node_size=int(payload["min_node_size"]),
            mtry=None if payload.get("mtry") is None else int(payload["mtry"]),
            sampling_weights=None if weights is None else tuple(weights),
            seed=int(payload.get("seed", 0)),
            bootstrap=bool(payload.get("bootstrap", True)),
        )


@dataclass(frozen=True)
class Tree:
    """
    Flat binary tree. Node i is a leaf when feature[i] == -1.

    value holds the node mean (shape (nodes, 1)) for regression, or the
    class counts [n0, n1] (shape (nodes, 2)) for classification.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    oob_rows: np.ndarray

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(x.shape[0], dtype=int)
        while True:
            feat = self.feature[node]
            active = np.flatnonzero(feat != LEAF)
            if active.size == 0:
                return node
            current = node[active]
            go_left = x[active, feat[active]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])

    def leaf_values(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "oob_rows": self.oob_rows.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Tree":
        return cls(
            feature=np.asarray(payload["feature"], dtype=int),
            threshold=np.asarray(payload["threshold"], dtype=float),
            left=np.asarray(payload["left"], dtype=int),
            right=np.asarray(payload["right"], dtype=int),
            value=np.asarray(payload["value"], dtype=float).reshape(len(payload["feature"]), -1),
            oob_rows=np.asarray(payload.get("oob_rows", []), dtype=int),
        )


@dataclass(frozen=True)
class ForestModel:
    """Fitted forest: trees, outcome kind and the resolved config."""

    trees: Tuple[Tree, ...]
    y_kind: str
    config: ForestConfig
    p: int

    family = "forest"

    def _check(self, x_new: Any) -> np.ndarray:
        return as_query_matrix(x_new, self.p)

    def predict(self, x_new: Any) -> np.ndarray:
        """Mean of leaf means (regression) or P(Y=1) (classification)."""
        if self.y_kind == BINARY:
            return self.predict_proba(x_new)[:, 1]
        x = self._check(x_new)
        per_tree = np.stack([t.leaf_values(x)[:, 0] for t in self.trees])
        return per_tree.mean(axis=0)

    def predict_proba(self, x_new: Any) -> np.ndarray:
        """Average of per-tree leaf class frequencies, (m, 2)."""
        if self.y_kind != BINARY:
            raise DataError("forest_predict_proba requires a forest fitted on a binary outcome")
        x = self._check(x_new)
        total = np.zeros((x.shape[0], 2))
        for tree in self.trees:
            counts = tree.leaf_values(x)
            total += counts / counts.sum(axis=1, keepdims=True)
        return total / len(self.trees)

    def conditional_mean(self, data: Dataset) -> np.ndarray:
        return self.predict(data.x)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "y_kind": self.y_kind,
            "p": int(self.p),
            "config": self.config.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ForestModel":
        return cls(
            trees=tuple(Tree.from_dict(t) for t in payload["trees"]),
            y_kind=payload["y_kind"],
            config=ForestConfig.from_dict(payload["config"]),
            p=int(payload["p"]),
        )


def draw_candidates(weights: np.ndarray, mtry: int, rng: np.random.Generator) -> List[int]:
    """
    Draws up to mtry distinct features, each draw proportional to the
    weight remaining after earlier draws. Zero-weight features are never drawn.
    """
    remaining = np.array(weights, dtype=float)
    chosen: List[int] = []
    for _ in range(mtry):
        total = remaining.sum()
        if total <= 0.0:
            break
        j = int(rng.choice(remaining.shape[0], p=remaining / total))
        chosen.append(j)
        remaining[j] = 0.0
    return chosen


def best_split(x: np.ndarray, y: np.ndarray, candidates: Sequence[int],
               classification: bool) -> Optional[Tuple[int, float, float]]:
    """
    Finds the best (feature, threshold) among the candidates.

    Ties in impurity decrease go to the lowest feature index, then the
    lowest threshold.

    Returns:
        Optional[Tuple[int, float, float]]: (feature, threshold, decrease), or None
    """
    n = y.shape[0]
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    if classification:
        ones = float(y.sum())
        zeros = n - ones
        parent = (ones * ones + zeros * zeros) / n
        reference = n - parent  # n * Gini
    else:
        yc = y - y.mean()
        total = float(yc.sum())
        reference = float(yc @ yc)
    if reference <= 0.0:
        return None
    best_gain = MIN_RELATIVE_GAIN * reference
    best: Optional[Tuple[int, float, float]] = None

    for j in sorted(candidates):
        col = x[:, j]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        boundary = xs[:-1] < xs[1:]
        if not boundary.any():
            continue
        if classification:
            ones_left = np.cumsum(y[order])[:-1]
            zeros_left = n_left - ones_left
            ones_right = ones - ones_left
            zeros_right = n_right - ones_right
            score = (ones_left ** 2 + zeros_left ** 2) / n_left + (ones_right ** 2 + zeros_right ** 2) / n_right
            gain = score - parent
        else:
            left_sum = np.cumsum(yc[order])[:-1]
            right_sum = total - left_sum
            gain = left_sum ** 2 / n_left + right_sum ** 2 / n_right - total ** 2 / n
        gain = np.where(boundary, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain = float(gain[i])
            best = (int(j), _midpoint(float(xs[i]), float(xs[i + 1])), best_gain)
    return best


def _midpoint(lo: float, hi: float) -> float:
    """Threshold t with lo <= t < hi; falls back to lo when the midpoint rounds up to hi."""
    mid = 0.5 * (lo + hi)
    return mid if lo <= mid < hi else lo


def _leaf_value(y: np.ndarray, classification: bool) -> np.ndarray:
    if y.shape[0] == 0:
        raise DataError("tree node has no rows")
    if classification:
        ones = float(y.sum())
        return np.array([y.shape[0] - ones, ones])
    if np.all(y == y[0]):
        return np.array([float(y[0])])
    return np.array([float(y.mean())])


def grow_tree(x: np.ndarray, y: np.ndarray, classification: bool, config: ForestConfig,
              rng: np.random.Generator) -> Tree:
    """
    Grows one tree on a bootstrap sample (or all rows when bootstrap is off).

    Args:
        x (np.ndarray): (n, p) features
        y (np.ndarray): (n,) outcome
        classification (bool): Gini for 0/1 outcomes, variance otherwise
        config (ForestConfig): Resolved config
        rng (np.random.Generator): This tree's stream

    Returns:
        Tree: Flat tree with out-of-bag rows recorded
    """
    n = y.shape[0]
    rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
    inbag = np.zeros(n, dtype=bool)
    inbag[rows] = True
    weights = np.asarray(config.sampling_weights, dtype=float)

    feature: List[int] = [LEAF]
    threshold: List[float] = [0.0]
    left: List[int] = [LEAF]
    right: List[int] = [LEAF]
    value: List[np.ndarray] = [_leaf_value(y[rows], classification)]
    stack: List[Tuple[int, np.ndarray]] = [(0, rows)]

    while stack:
        node, idx = stack.pop()
        yy = y[idx]
        if idx.shape[0] <= config.min_node_size or np.all(yy == yy[0]):
            continue
        candidates = draw_candidates(weights, config.mtry, rng)
        split = best_split(x[idx], yy, candidates, classification)
        if split is None:
            continue
        j, thr, _ = split
        go_left = x[idx, j] <= thr
        children = []
        for part in (idx[go_left], idx[~go_left]):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(_leaf_value(y[part], classification))
            children.append((len(feature) - 1, part))
        feature[node] = j
        threshold[node] = thr
        left[node] = children[0][0]
        right[node] = children[1][0]
        # right pushed first so the left subtree is grown first
        stack.append(children[1])
        stack.append(children[0])

    return Tree(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        value=np.vstack(value),
        oob_rows=np.flatnonzero(~inbag),
    )


def forest_fit(train: Dataset, config: Optional[ForestConfig] = None) -> ForestModel:
    """
    Fits the forest. Each tree draws from its own stream spawned from
    config.seed, so serial and threaded fits give identical forests.

    Args:
        train (Dataset): Training data
        config (Optional[ForestConfig]): Hyperparameters (defaults from [EdfFair.Forest])

    Returns:
        ForestModel: Fitted forest
    """
    logger = get_logger("Forest")
    if not isinstance(train, Dataset):
        raise TypeError("train must be a Dataset")
    config = (config or ForestConfig.from_settings()).resolve(train.p)
    if train.n < config.min_node_size:
        raise DataError(f"n={train.n} is smaller than min_node_size={config.min_node_size}")
    y = np.asarray(train.y, dtype=float)
    if y.size == 0 or not np.all(np.isfinite(y)):
        raise DataError("forest outcome is empty or non-finite")
    classification = train.y_kind == BINARY
    if classification and not np.all((y == 0.0) | (y == 1.0)):
        raise DataError("binary forest outcome must contain only 0 and 1")

    streams = np.random.SeedSequence(int(config.seed)).spawn(config.n_trees)

    def build(t: int) -> Tree:
        return grow_tree(train.x, y, classification, config, np.random.default_rng(streams[t]))

    logger.debug(f"forest fit: n={train.n}, p={train.p}, trees={config.n_trees}, mtry={config.mtry}, "
                 f"min_node_size={config.min_node_size}, weights={list(config.sampling_weights)}")
    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as executor:
            trees = list(executor.map(build, range(config.n_trees)))
    else:
        trees = [build(t) for t in range(config.n_trees)]
    return ForestModel(trees=tuple(trees), y_kind=train.y_kind, config=config, p=train.p)


def forest_predict(model: ForestModel, x_new: Any) -> np.ndarray:
    """Regression mean of leaf means, or P(Y=1) for classification forests."""
    return model.predict(x_new)


def forest_predict_proba(model: ForestModel, x_new: Any) -> np.ndarray:
    """Averaged leaf class frequencies, (m, 2)."""
    return model.predict_proba(x_new)


def forest_oob_predict(model: ForestModel, train: Dataset) -> np.ndarray:
    """
    Out-of-bag prediction per training row (NaN for rows in every bag).

    Returns:
        np.ndarray: (n,) OOB mean / P(Y=1)
    """
    if train.p != model.p:
        raise DataError(f"training data has {train.p} features, forest expects {model.p}")
    total = np.zeros(train.n)
    count = np.zeros(train.n)
    for tree in model.trees:
        rows = tree.oob_rows
        if rows.size == 0:
            continue
        values = tree.leaf_values(train.x[rows])
        if model.y_kind == BINARY:
            values = values[:, 1] / values.sum(axis=1)
        else:
            values = values[:, 0]
        total[rows] += values
        count[rows] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def oob_error(model: ForestModel, train: Dataset) -> float:
    """OOB misclassification rate (binary) or mean absolute error (continuous)."""
    pred = forest_oob_predict(model, train)
    seen = ~np.isnan(pred)
    if not seen.any():
        raise DataError("no out-of-bag rows (bootstrap disabled?)")
    if model.y_kind == BINARY:
        return float(np.mean((pred[seen] >= 0.5).astype(float) != train.y[seen]))
    return float(np.mean(np.abs(pred[seen] - train.y[seen])))


def split_counts(model: ForestModel) -> np.ndarray:
    """Number of internal nodes splitting on each feature, across the forest."""
    counts = np.zeros(model.p, dtype=int)
    for tree in model.trees:
        used = tree.feature[tree.feature != LEAF]
        counts += np.bincount(used, minlength=model.p)
    return counts
