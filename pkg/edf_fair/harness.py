"""
EDF Experiment Harness Module

Replicated-holdout experiments over a deweighting grid. Replication r
draws one train/holdout split (seeded by SeedSequence([master_seed, r]))
and evaluates every grid value on it, so grid points are compared on
common random numbers. Replications run concurrently and are reduced by
index, giving identical tables for any thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import json
import math
import os

import numpy as np

from edf_fair.errors import ConfigError, DataError, EdfError, annotate
from edf_fair.fairness import (
    AUX_FAMILIES, build_T, build_W_all, evaluate_model, format_deweight,
    format_rho, format_table, format_utility, proxy_adequacy, rho_headers, w_construction,
)
from edf_fair.forest import ForestConfig, forest_fit
from edf_fair.knn import knn_fit
from edf_fair.linear import CLOSED_FORM, FIT_METHODS, fit_linear
from edf_fair.tabular import BINARY, DataSource, Dataset, DeweightSpec, load_source, split_holdout
from edf_fair.twostage import fit_twostage
from edf_fair.utils import dumps_canonical, get_logger, read_json, resolve_threads, settings

LINEAR = "linear-edf"
TWOSTAGE = "twostage"
KNN = "knn"
FOREST = "forest"
FAMILIES = (LINEAR, TWOSTAGE, KNN, FOREST)

FAMILY_PARAMS = {
    LINEAR: ("fit_method",),
    TWOSTAGE: ("include_sensitive",),
    KNN: ("k", "chunk_size"),
    FOREST: ("n_trees", "min_node_size", "mtry", "bootstrap"),
}

CONFIG_KEYS = (
    "data", "family", "family_params", "deweight_grid", "replications", "holdout_size",
    "master_seed", "aux_family", "aux_k", "threshold", "proxy_adequacy",
)

GridValue = Union[float, Dict[str, float]]


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Experiment description, normally read from a JSON document.

    Attributes:
        data: Dataset location and column roles
        family: "linear-edf", "twostage", "knn" or "forest"
        family_params: Family hyperparameters (k, forest settings, fit_method, include_sensitive)
        deweight_grid: delta = d^2 (linear), factor (knn/forest) or lambda (twostage);
            an entry may also map feature names to values
        replications: Random holdout sets per grid value
        holdout_size: Rows per holdout set
        master_seed: Seed from which every replication seed is derived
        aux_family: Estimator of P(S = 1 | X) for 0/1 sensitive columns
        aux_k: Neighbors for the k-NN auxiliary
        threshold: OPM classification threshold
        proxy_adequacy: Optional {"sensitive": column} block
    """

    data: Optional[DataSource]
    family: str
    deweight_grid: Tuple[GridValue, ...]
    replications: int = 1
    holdout_size: int = 1000
    master_seed: int = 0
    family_params: Dict[str, Any] = field(default_factory=dict)
    aux_family: str = "knn"
    aux_k: int = 25
    threshold: float = 0.5
    proxy_adequacy: Optional[Dict[str, Any]] = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not isinstance(self.deweight_grid, (list, tuple)) or not self.deweight_grid:
            raise ConfigError("deweight_grid must be a nonempty list")
        object.__setattr__(self, "deweight_grid", tuple(check_grid_value(self.family, v) for v in self.deweight_grid))
        for name in ("replications", "holdout_size", "aux_k"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise ConfigError(f"master_seed must be a nonnegative integer, got {self.master_seed!r}")
        unknown = sorted(set(self.family_params) - set(FAMILY_PARAMS[self.family]))
        if unknown:
            raise ConfigError(f"family_params {unknown} do not apply to family {self.family!r}")
        if self.family == LINEAR and self.family_params.get("fit_method", CLOSED_FORM) not in FIT_METHODS:
            raise ConfigError(f"fit_method must be one of {FIT_METHODS}")
        if self.aux_family not in AUX_FAMILIES:
            raise ConfigError(f"aux_family must be one of {AUX_FAMILIES}, got {self.aux_family!r}")
        if not 0.0 < float(self.threshold) < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.proxy_adequacy is not None:
            if not isinstance(self.proxy_adequacy, Mapping) or not isinstance(self.proxy_adequacy.get("sensitive"), str):
                raise ConfigError("proxy_adequacy must be an object with a 'sensitive' column name")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], base_dir: Optional[str] = None) -> "ExperimentConfig":
        """
        Builds a config from a JSON object; omitted keys take the TOML defaults.

        Args:
            payload (Mapping[str, Any]): Parsed JSON
            base_dir (Optional[str]): Directory that relative data paths resolve against

        Returns:
            ExperimentConfig: Validated config

        Raises:
            ConfigError: On unknown keys, missing keys or invalid values
        """
        if not isinstance(payload, Mapping):
            raise ConfigError("experiment config must be a JSON object")
        unknown = sorted(set(payload) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"Unknown experiment config key(s): {unknown}")
        for key in ("data", "family", "deweight_grid"):
            if key not in payload:
                raise ConfigError(f"experiment config is missing required key {key!r}")
        defaults = settings("EdfFair")
        fairness = settings("EdfFair", "Fairness")
        params = payload.get("family_params") or {}
        if not isinstance(params, Mapping):
            raise ConfigError("family_params must be an object")
        try:
            return cls(
                data=DataSource.from_dict(payload["data"], base_dir),
                family=payload["family"],
                deweight_grid=payload["deweight_grid"],
                replications=payload.get("replications", 1),
                holdout_size=payload.get("holdout_size", int(defaults.get("holdout_size", 1000))),
                master_seed=payload.get("master_seed", 0),
                family_params=dict(params),
                aux_family=payload.get("aux_family", fairness.get("aux_family", "knn")),
                aux_k=payload.get("aux_k", int(fairness.get("aux_k", 25))),
                threshold=float(payload.get("threshold", fairness.get("threshold", 0.5))),
                proxy_adequacy=payload.get("proxy_adequacy"),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, EdfError):
                raise
            raise ConfigError(f"Invalid experiment config: {e}") from e

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        """Reads a JSON experiment config; data paths resolve relative to the file."""
        return cls.from_dict(read_json(path), base_dir=os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "data": None if self.data is None else self.data.to_dict(),
            "family": self.family,
            "family_params": dict(self.family_params),
            "deweight_grid": list(self.deweight_grid),
            "replications": int(self.replications),
            "holdout_size": int(self.holdout_size),
            "master_seed": int(self.master_seed),
            "aux_family": self.aux_family,
            "aux_k": int(self.aux_k),
            "threshold": float(self.threshold),
            "proxy_adequacy": self.proxy_adequacy,
        }


@dataclass(frozen=True)
class ReplicationRecord:
    """One (replication, grid value) evaluation, as persisted in records.jsonl."""

    replication: int
    grid_index: int
    deweight: GridValue
    utility_name: str
    utility: float
    rho: Tuple[Tuple[str, float], ...]
    proxy: Tuple[Tuple[str, float], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "replication": self.replication,
            "grid_index": self.grid_index,
            "deweight": self.deweight,
            "utility_name": self.utility_name,
            "utility": self.utility,
            "rho_squared": [[label, value] for label, value in self.rho],
            "proxy_rho_squared": [[label, value] for label, value in self.proxy],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ReplicationRecord":
        return cls(
            replication=int(payload["replication"]),
            grid_index=int(payload["grid_index"]),
            deweight=payload["deweight"],
            utility_name=payload["utility_name"],
            utility=float(payload["utility"]),
            rho=tuple((str(label), float(value)) for label, value in payload["rho_squared"]),
            proxy=tuple((str(label), float(value)) for label, value in payload.get("proxy_rho_squared", [])),
        )


@dataclass(frozen=True)
class ReplicationRow:
    """Means and standard errors for one grid value."""

    deweight: GridValue
    mean_utility: float
    se_utility: float
    mean_rho: Tuple[float, ...]
    se_rho: Tuple[float, ...]
    n_replications: int
    mean_proxy: Tuple[float, ...] = ()
    se_proxy: Tuple[float, ...] = ()

    @property
    def max_rho(self) -> float:
        return max(self.mean_rho)

    def to_dict(self, categories: Sequence[str], proxy_categories: Sequence[str] = ()) -> Dict[str, Any]:
        out = {
            "deweight": self.deweight,
            "mean_utility": self.mean_utility,
            "se_utility": self.se_utility,
            "rho_squared": [
                {"category": c, "mean": m, "se": s} for c, m, s in zip(categories, self.mean_rho, self.se_rho)
            ],
            "n_replications": self.n_replications,
        }
        if self.mean_proxy:
            out["proxy_rho_squared"] = [
                {"category": c, "mean": m, "se": s}
                for c, m, s in zip(proxy_categories, self.mean_proxy, self.se_proxy)
            ]
        return out


@dataclass(frozen=True)
class ReplicationTable:
    """
    One row per grid value, in grid order.

    Attributes:
        rows: Aggregated rows
        utility_name: "MAPE" or "OPM"
        categories: Sensitive category labels, one rho^2 column each
        proxy_categories: Labels of the proxy-adequacy columns, if tracked
    """

    rows: Tuple[ReplicationRow, ...]
    utility_name: str
    categories: Tuple[str, ...]
    proxy_categories: Tuple[str, ...] = ()

    def to_text(self) -> str:
        """Aligned table: deweight | utility | rho^2 per category (| proxy rho^2 per level)."""
        header = ["deweight", self.utility_name] + rho_headers(self.categories)
        header += [f"{label} proxy rho^2" for label in self.proxy_categories]
        body = []
        for row in self.rows:
            cells = [format_deweight(row.deweight), format_utility(self.utility_name, row.mean_utility)]
            cells += [format_rho(v) for v in row.mean_rho]
            cells += [format_rho(v) for v in row.mean_proxy]
            body.append(cells)
        return format_table(header, body)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "utility_name": self.utility_name,
            "categories": list(self.categories),
            "proxy_categories": list(self.proxy_categories),
            "rows": [r.to_dict(self.categories, self.proxy_categories) for r in self.rows],
        }


@dataclass(frozen=True)
class DeweightChoice:
    """Result of select_deweight; feasible is False when no row met the cap."""

    row: ReplicationRow
    rho_cap: float
    feasible: bool

    @property
    def deweight(self) -> GridValue:
        return self.row.deweight

    def to_dict(self) -> Dict[str, Any]:
        return {
            "deweight": self.row.deweight,
            "rho_cap": self.rho_cap,
            "feasible": self.feasible,
            "mean_utility": self.row.mean_utility,
            "max_mean_rho_squared": self.row.max_rho,
        }


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: Tuple[ReplicationRecord, ...]
    table: ReplicationTable
    constructions: Dict[str, str]

    def summary(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "table": self.table.to_dict(),
            "evaluated_on": "holdout",
            "constructions": dict(self.constructions),
            "standard_errors": "sample sd over replications (n - 1 denominator) / sqrt(n); additional output",
        }


class ExperimentRunner:
    """
    Runs an ExperimentConfig against a Dataset.

    The dataset is loaded once; each replication is one unit of work
    (split, build W, loop over the grid) executed in a thread pool.
    """

    def __init__(self, config: ExperimentConfig, data: Optional[Dataset] = None,
                 threads: Optional[int] = None, log_level: Optional[int] = None):
        """
        Args:
            config (ExperimentConfig): Experiment description
            data (Optional[Dataset]): Preloaded data (default: load config.data)
            threads (Optional[int]): Worker threads (default: EDF_THREADS, then [EdfFair] threads)
            log_level (Optional[int]): Logger level override
        """
        from app_utils import ConfigManager

        self.config = config
        self.logger = get_logger("Harness", log_level)
        self.threads = resolve_threads(threads, ConfigManager.get_config())
        if data is None:
            if config.data is None:
                raise ConfigError("experiment config has no data source")
            data = load_source(config.data)
        if not isinstance(data, Dataset):
            raise TypeError("data must be a Dataset")
        if data.q < 1:
            raise DataError("experiment data has no sensitive column")
        if config.holdout_size > data.n - 2:
            raise DataError(f"holdout_size {config.holdout_size} leaves fewer than 2 training rows (n={data.n})")
        self.data = data
        self.proxy_index = self._proxy_index()
        self.full_data = data.with_sensitive_features() if self.proxy_index is not None else None

    def _proxy_index(self) -> Optional[int]:
        block = self.config.proxy_adequacy
        if block is None:
            return None
        name = block["sensitive"]
        if name not in self.data.sensitive_names:
            raise ConfigError(f"proxy_adequacy.sensitive {name!r} is not a sensitive column {self.data.sensitive_names}")
        index = self.data.sensitive_names.index(name)
        if self.data.sensitive_kind(index) != BINARY:
            raise ConfigError(f"proxy_adequacy needs a 0/1 sensitive column, {name!r} is continuous")
        return index

    def run(self) -> ExperimentResult:
        """
        Runs every replication and aggregates.

        Returns:
            ExperimentResult: Records (sorted by replication, grid index), table and W constructions
        """
        cfg = self.config
        self.logger.info(f"Experiment: family={cfg.family}, grid={list(cfg.deweight_grid)}, "
                         f"replications={cfg.replications}, holdout={cfg.holdout_size}, n={self.data.n}")
        self.logger.info(f"Using {self.threads} worker thread(s)")
        reps = range(cfg.replications)
        if self.threads > 1 and cfg.replications > 1:
            with ThreadPoolExecutor(max_workers=min(self.threads, cfg.replications)) as executor:
                per_rep = list(executor.map(self.run_replication, reps))
        else:
            per_rep = [self.run_replication(r) for r in reps]
        records = tuple(rec for batch in per_rep for rec in batch)
        table = aggregate(records)
        constructions = {"T": "P(Y=1|X)" if self.data.y_kind == BINARY else "predicted Y"}
        for j in range(self.data.q):
            constructions[f"W[{self.data.sensitive_names[j]}]"] = w_construction(self.data, j, cfg.aux_family, cfg.aux_k)
        self.logger.info(f"Experiment complete: {len(records)} evaluations")
        return ExperimentResult(cfg, records, table, constructions)

    def run_replication(self, replication: int) -> List[ReplicationRecord]:
        """
        Splits once, builds W once, then fits and evaluates every grid value.

        Args:
            replication (int): Replication index

        Returns:
            List[ReplicationRecord]: One record per grid value, in grid order
        """
        cfg = self.config
        split_seed, model_seed = replication_seeds(cfg.master_seed, replication)
        try:
            train, test = split_holdout(self.data, cfg.holdout_size, split_seed)
            w_columns = build_W_all(train, test, cfg.aux_family, cfg.aux_k)
            full_train = full_test = None
            if self.full_data is not None:
                full_train, full_test = split_holdout(self.full_data, cfg.holdout_size, split_seed)
        except EdfError as e:
            raise annotate(e, f"replication {replication}") from e

        records = []
        for g, value in enumerate(cfg.deweight_grid):
            try:
                model = fit_family(cfg.family, train, value, cfg.family_params, model_seed)
                report = evaluate_model(model, train, test, cfg.aux_family, cfg.aux_k,
                                        threshold=cfg.threshold, w_columns=w_columns, deweight=value)
                proxy: Tuple[Tuple[str, float], ...] = ()
                if full_train is not None:
                    proxy = self._proxy(model, test, full_train, full_test, value, model_seed)
            except EdfError as e:
                raise annotate(e, f"grid value {format_grid_value(value)}, replication {replication}") from e
            records.append(ReplicationRecord(
                replication=replication,
                grid_index=g,
                deweight=value,
                utility_name=report.utility_name,
                utility=report.utility_value,
                rho=report.categories,
                proxy=proxy,
            ))
        self.logger.debug(f"replication {replication} done")
        return records

    def _proxy(self, model: Any, test: Dataset, full_train: Dataset, full_test: Dataset,
               value: GridValue, model_seed: int) -> Tuple[Tuple[str, float], ...]:
        """rho^2 between the full model (S appended) and the EDF model, per level of the tracked column."""
        name = self.data.sensitive_names[self.proxy_index]
        if self.config.family == TWOSTAGE:
            full_fitted = model.predict_sfree(test.x, test.s, include_sensitive=True)
        else:
            full_model = fit_family(self.config.family, full_train, value, self.config.family_params, model_seed)
            full_fitted = build_T(full_model, full_test)
        edf_fitted = build_T(model, test)
        levels = proxy_adequacy(full_fitted, edf_fitted, test.s[:, self.proxy_index])
        return tuple((f"{name}.{label}", value) for label, value in levels)


def run_experiment(config: ExperimentConfig, data: Optional[Dataset] = None,
                   threads: Optional[int] = None) -> ExperimentResult:
    """
    Runs a replicated-holdout experiment.

    Args:
        config (ExperimentConfig): Experiment description
        data (Optional[Dataset]): Preloaded data (default: load config.data)
        threads (Optional[int]): Worker threads; results do not depend on it

    Returns:
        ExperimentResult: Per-replication records plus the aggregated ReplicationTable
    """
    return ExperimentRunner(config, data, threads).run()


def replication_seeds(master_seed: int, replication: int) -> Tuple[np.random.SeedSequence, int]:
    """(split seed sequence, integer model seed) for one replication."""
    split_ss, model_ss = np.random.SeedSequence([int(master_seed), int(replication)]).spawn(2)
    return split_ss, int(model_ss.generate_state(1)[0])


def deweight_spec(family: str, data: Dataset, value: GridValue) -> DeweightSpec:
    """
    DeweightSpec for a grid value: delta = d^2 for the linear family,
    a factor for k-NN and forests; a mapping sets features individually.
    """
    if family == LINEAR:
        if isinstance(value, Mapping):
            return DeweightSpec.per_feature(data, deltas=value)
        return DeweightSpec.common(data.c_mask, delta=value)
    if isinstance(value, Mapping):
        return DeweightSpec.per_feature(data, factors=value)
    return DeweightSpec.common(data.c_mask, factor=value)


def fit_family(family: str, train: Dataset, value: GridValue, params: Mapping[str, Any], seed: int = 0) -> Any:
    """
    Fits one model of the given family at one grid value.

    Args:
        family (str): Model family
        train (Dataset): Training rows
        value (GridValue): Grid value (lambda for twostage)
        params (Mapping[str, Any]): family_params
        seed (int): Forest seed

    Returns:
        Any: Fitted model
    """
    if family == TWOSTAGE:
        include = params.get("include_sensitive", settings("EdfFair", "TwoStage").get("include_sensitive", False))
        return fit_twostage(train, float(value), include_sensitive=bool(include))
    spec = deweight_spec(family, train, value)
    if family == LINEAR:
        return fit_linear(train, spec, params.get("fit_method", CLOSED_FORM))
    if family == KNN:
        return knn_fit(train, spec, params.get("k"), params.get("chunk_size"))
    if family == FOREST:
        overrides = {key: params.get(key) for key in ("n_trees", "min_node_size", "mtry", "bootstrap")}
        return forest_fit(train, ForestConfig.from_settings(spec, seed=int(seed), **overrides))
    raise ConfigError(f"family must be one of {FAMILIES}, got {family!r}")


def aggregate(records: Sequence[ReplicationRecord]) -> ReplicationTable:
    """
    Recomputes the ReplicationTable from per-replication records: means and
    standard errors (sample sd with n - 1, divided by sqrt(n)) per grid value.

    Args:
        records (Sequence[ReplicationRecord]): Records in any order

    Returns:
        ReplicationTable: Rows in grid order
    """
    if not records:
        raise DataError("no replication records to aggregate")
    ordered = sorted(records, key=lambda r: (r.grid_index, r.replication))
    first = ordered[0]
    categories = tuple(label for label, _ in first.rho)
    proxy_categories = tuple(label for label, _ in first.proxy)
    names = {r.utility_name for r in ordered}
    if len(names) != 1:
        raise DataError(f"records mix utility metrics {sorted(names)}")

    rows = []
    for g in sorted({r.grid_index for r in ordered}):
        group = [r for r in ordered if r.grid_index == g]
        for r in group:
            if tuple(label for label, _ in r.rho) != categories:
                raise DataError(f"record for replication {r.replication} has different sensitive categories")
        utility = np.array([r.utility for r in group])
        rho = np.array([[v for _, v in r.rho] for r in group])
        proxy = np.array([[v for _, v in r.proxy] for r in group]) if proxy_categories else np.zeros((len(group), 0))
        rows.append(ReplicationRow(
            deweight=group[0].deweight,
            mean_utility=float(utility.mean()),
            se_utility=_standard_error(utility),
            mean_rho=tuple(float(v) for v in rho.mean(axis=0)),
            se_rho=tuple(_standard_error(rho[:, j]) for j in range(rho.shape[1])),
            n_replications=len(group),
            mean_proxy=tuple(float(v) for v in proxy.mean(axis=0)),
            se_proxy=tuple(_standard_error(proxy[:, j]) for j in range(proxy.shape[1])),
        ))
    return ReplicationTable(tuple(rows), first.utility_name, categories, proxy_categories)


def _standard_error(values: np.ndarray) -> float:
    if values.shape[0] < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(values.shape[0]))


def select_deweight(table: ReplicationTable, rho_cap: float) -> DeweightChoice:
    """
    Best-utility row among those whose largest mean rho^2 is within the cap;
    the lowest-rho^2 row, flagged infeasible, when none is.

    Args:
        table (ReplicationTable): Aggregated experiment
        rho_cap (float): Fairness cap in [0, 1]

    Returns:
        DeweightChoice: Chosen row and feasibility flag (earlier grid rows win ties)
    """
    if not table.rows:
        raise DataError("cannot select from an empty table")
    rho_cap = float(rho_cap)
    if not 0.0 <= rho_cap <= 1.0:
        raise ConfigError(f"rho cap must lie in [0, 1], got {rho_cap}")
    feasible = [row for row in table.rows if row.max_rho <= rho_cap]
    if feasible:
        return DeweightChoice(min(feasible, key=lambda row: row.mean_utility), rho_cap, True)
    return DeweightChoice(min(table.rows, key=lambda row: row.max_rho), rho_cap, False)


def write_outputs(result: ExperimentResult, out_dir: str) -> Dict[str, str]:
    """
    Writes records.jsonl, summary.json and table.txt.

    Args:
        result (ExperimentResult): Finished experiment
        out_dir (str): Output directory (created if missing)

    Returns:
        Dict[str, str]: Artifact name -> path
    """
    logger = get_logger("Harness")
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "records": os.path.join(out_dir, "records.jsonl"),
        "summary": os.path.join(out_dir, "summary.json"),
        "table": os.path.join(out_dir, "table.txt"),
    }
    with open(paths["records"], "w", encoding="utf-8") as f:
        for record in result.records:
            f.write(dumps_canonical(record.to_dict(), indent=None) + "\n")
    with open(paths["summary"], "w", encoding="utf-8") as f:
        f.write(dumps_canonical(result.summary()) + "\n")
    with open(paths["table"], "w", encoding="utf-8") as f:
        f.write(result.table.to_text())
    logger.info(f"Summary saved to {paths['summary']}")
    return paths


def load_records(path: str) -> List[ReplicationRecord]:
    """
    Reads per-replication records from a JSON-lines file.

    Raises:
        DataError: If the file is missing or a line is malformed
    """
    if not os.path.isfile(path):
        raise DataError(f"File not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(ReplicationRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DataError(f"{path}:{lineno}: malformed record: {e}") from e
    return records


def format_grid_value(value: GridValue) -> str:
    if isinstance(value, Mapping):
        return ",".join(f"{k}={v:g}" for k, v in sorted(value.items()))
    return f"{float(value):g}"


def check_grid_value(family: str, value: Any) -> GridValue:
    if isinstance(value, Mapping):
        if family == TWOSTAGE:
            raise ConfigError("twostage grid values are scalar lambdas")
        if not value:
            raise ConfigError("per-feature grid entries must name at least one feature")
        return {str(k): _check_scalar(family, v) for k, v in value.items()}
    return _check_scalar(family, value)


def _check_scalar(family: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ConfigError(f"grid value {value!r} is not a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"grid value {value} is not finite")
    if family in (KNN, FOREST) and not 0.0 <= value <= 1.0:
        raise ConfigError(f"{family} deweight factors must lie in [0, 1], got {value}")
    if family in (LINEAR, TWOSTAGE) and value < 0:
        raise ConfigError(f"{family} grid values must be nonnegative, got {value}")
    return value
