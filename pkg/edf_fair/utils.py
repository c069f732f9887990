"""
EDF Utilities Module

Small helpers shared across the package: the symmetric positive-definite
solver used by both ridge paths and the two-stage baseline, array
validation, hashing and JSON helpers, and thread-count resolution.
"""

from typing import Any, Dict, Optional, Union
import hashlib
import json
import os

import numpy as np
from scipy import linalg

from edf_fair.errors import ConfigError, DataError, SingularMatrixError

# Reciprocal condition below which an equilibrated SPD system counts as singular
SINGULAR_RCOND = 1e-12


def solve_spd(matrix: np.ndarray, rhs: np.ndarray, what: str = "linear system") -> np.ndarray:
    """
    Solves a symmetric positive-definite system by Cholesky factorization.

    The matrix is first equilibrated to unit diagonal so that very large
    penalties on a few coordinates do not masquerade as ill-conditioning.
    No pseudo-inverse fallback: a singular system is an error.

    Args:
        matrix (np.ndarray): Symmetric (p, p) matrix
        rhs (np.ndarray): Right-hand side, shape (p,) or (p, k)
        what (str): Name used in the error message

    Returns:
        np.ndarray: Solution with the shape of rhs

    Raises:
        SingularMatrixError: If the matrix is singular or numerically so
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    diag = np.diag(matrix)
    if not np.all(np.isfinite(matrix)):
        raise SingularMatrixError(f"{what} contains non-finite entries")
    if np.any(diag <= 0.0):
        bad = int(np.flatnonzero(diag <= 0.0)[0])
        raise SingularMatrixError(f"{what} is singular: zero diagonal at position {bad}")

    scale = 1.0 / np.sqrt(diag)
    scaled = matrix * scale[:, None] * scale[None, :]

    eigenvalues = np.linalg.eigvalsh(scaled)
    if eigenvalues[0] <= SINGULAR_RCOND * eigenvalues[-1]:
        raise SingularMatrixError(
            f"{what} is singular (reciprocal condition {eigenvalues[0] / eigenvalues[-1]:.3e})"
        )

    try:
        factor = linalg.cho_factor(scaled, lower=False, check_finite=False)
    except linalg.LinAlgError as e:
        raise SingularMatrixError(f"{what} is not positive definite: {e}") from e

    scaled_rhs = rhs * (scale[:, None] if rhs.ndim == 2 else scale)
    solution = linalg.cho_solve(factor, scaled_rhs, check_finite=False)
    return solution * (scale[:, None] if rhs.ndim == 2 else scale)


def as_query_matrix(x_new: Any, p: int, what: str = "x_new") -> np.ndarray:
    """
    Coerces a p-vector or (m, p) matrix to a finite 2-D float array.

    Args:
        x_new (Any): Query row(s)
        p (int): Expected number of columns
        what (str): Name used in error messages

    Returns:
        np.ndarray: Array of shape (m, p)
    """
    arr = np.asarray(x_new, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != p:
        raise DataError(f"{what} has shape {np.shape(x_new)}, expected {p} columns")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contains non-finite values")
    return arr


def sha256_file(path: str) -> str:
    """
    Computes the SHA-256 hex digest of a file.

    Args:
        path (str): File path

    Returns:
        str: Hex digest
    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1024 * 1024), b""):
            digest.update(chunk)
    return digest.hexdigest()


def to_jsonable(value: Any) -> Any:
    """Recursively converts numpy containers/scalars to plain JSON types."""
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def dumps_canonical(payload: Any, indent: Optional[int] = 2) -> str:
    """
    Serializes to JSON with sorted keys so equal payloads are byte-equal.

    Args:
        payload (Any): JSON-able object (numpy values allowed)
        indent (Optional[int]): Indentation, None for a single line

    Returns:
        str: JSON text
    """
    return json.dumps(to_jsonable(payload), indent=indent, sort_keys=True, ensure_ascii=False)


def read_json(path: str) -> Dict[str, Any]:
    """
    Reads a JSON document, mapping parse failures to ConfigError.

    Args:
        path (str): File path

    Returns:
        Dict[str, Any]: Parsed object
    """
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed JSON in {path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return payload


def resolve_threads(threads: Optional[Union[int, str]], config: Dict[str, Any]) -> int:
    """
    Resolves the worker count: explicit value, then EDF_THREADS, then config.

    Args:
        threads (Optional[Union[int, str]]): Explicit request (e.g. --threads)
        config (Dict[str, Any]): Configuration dictionary

    Returns:
        int: Positive thread count
    """
    if threads is None:
        threads = os.environ.get("EDF_THREADS") or config.get("EdfFair", {}).get("threads", 1)
    try:
        count = int(threads)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"threads must be a positive integer, got {threads!r}") from e
    if count < 1:
        raise ConfigError(f"threads must be a positive integer, got {count}")
    return count


def get_logger(component: str, log_level: Optional[int] = None):
    """
    Returns the configured logger for a package component.

    Args:
        component (str): Component suffix, e.g. "Linear" -> "EdfFair.Linear"
        log_level (Optional[int]): Override logging level

    Returns:
        logging.Logger: Logger configured from the [Logging] table
    """
    from app_utils import ConfigManager, LoggingManager

    return LoggingManager.get_logger(f"EdfFair.{component}", ConfigManager.get_config(), log_level)


def settings(*path: str) -> Dict[str, Any]:
    """
    Returns a nested table of the TOML defaults, e.g. settings("EdfFair", "Knn").

    Args:
        *path (str): Table names

    Returns:
        Dict[str, Any]: Table contents ({} when absent)
    """
    from app_utils import ConfigManager

    return ConfigManager.section(ConfigManager.get_config(), *path)
