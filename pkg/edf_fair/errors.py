"""
EDF Error Module

Exception hierarchy shared by every module, and the mapping from
exceptions to CLI exit codes.
"""

from typing import Type


class EdfError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


class ConfigError(EdfError, ValueError):
    """Invalid experiment/fit description or hyperparameter."""

    exit_code = 2


class DataError(EdfError, ValueError):
    """Ingestion or data-shape problem (missing column, constant column, NaN, ...)."""

    exit_code = 3


class NumericalError(EdfError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""

    exit_code = 4


class SingularMatrixError(NumericalError):
    """A linear system that must be solved exactly is singular."""


class ModelCapabilityError(EdfError, TypeError):
    """The model cannot produce the output a metric needs (e.g. probabilities)."""

    exit_code = 2


def exit_code_for(exc: BaseException) -> int:
    """
    Map an exception to the CLI exit-code scheme {2, 3, 4}.

    Args:
        exc (BaseException): Raised exception

    Returns:
        int: Exit code (1 for anything unexpected)
    """
    if isinstance(exc, EdfError):
        return exc.exit_code
    return 1


def annotate(exc: EdfError, prefix: str) -> EdfError:
    """
    Build an exception of the same class with a context prefix.

    Args:
        exc (EdfError): Original error
        prefix (str): Context, e.g. "grid value 25, replication 3"

    Returns:
        EdfError: New instance carrying the prefixed message
    """
    cls: Type[EdfError] = type(exc)
    try:
        return cls(f"{prefix}: {exc}")
    except TypeError:
        return EdfError(f"{prefix}: {exc}")
