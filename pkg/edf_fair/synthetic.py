"""
EDF Synthetic Data Module

Generators for small datasets with a known proxy structure: one feature
that carries information about a 0/1 sensitive attribute and one that
does not. Used by the test suite, the usage example and demos.
"""

from typing import Optional

import numpy as np
import pandas as pd

from edf_fair.errors import ConfigError
from edf_fair.tabular import BINARY, CONTINUOUS, Dataset, SeedLike

OCCUPATIONS = (100, 200, 300, 400, 500, 600)


def proxy_arrays(n: int, seed: SeedLike = 0, proxy_sd: float = 0.5, noise_sd: float = 1.5,
                 binary_outcome: bool = False):
    """
    Raw arrays for the proxy fixture:

        s  ~ Bernoulli(0.5)
        x1 = s + N(0, proxy_sd^2)        (the proxy, in C)
        x2 ~ N(0, 1)
        y  = x1 + x2 + N(0, noise_sd^2)   (or 1{y > 0.5} when binary_outcome)

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: x (n, 2), y (n,), s (n,)
    """
    if n < 3:
        raise ConfigError(f"n must be at least 3, got {n}")
    rng = np.random.default_rng(seed)
    s = rng.binomial(1, 0.5, size=n).astype(float)
    x1 = s + rng.normal(0.0, proxy_sd, size=n)
    x2 = rng.normal(0.0, 1.0, size=n)
    y = x1 + x2 + rng.normal(0.0, noise_sd, size=n)
    if binary_outcome:
        y = (y > 0.5).astype(float)
    return np.column_stack([x1, x2]), y, s


def proxy_fixture(n: int = 3000, seed: SeedLike = 0, proxy_sd: float = 0.5, noise_sd: float = 1.5,
                  binary_outcome: bool = False) -> Dataset:
    """
    Dataset with features (x1, x2), C = {x1} and one 0/1 sensitive column "s".

    Args:
        n (int): Rows
        seed (SeedLike): RNG seed
        proxy_sd (float): Noise in x1 around s
        noise_sd (float): Outcome noise
        binary_outcome (bool): Threshold y at 0.5

    Returns:
        Dataset: Standardized dataset
    """
    x, y, s = proxy_arrays(n, seed, proxy_sd, noise_sd, binary_outcome)
    return Dataset.from_arrays(
        x, y, s, c_mask=[True, False],
        feature_names=["x1", "x2"],
        sensitive_names=["s"],
        y_kind=BINARY if binary_outcome else CONTINUOUS,
        sensitive_kinds=[BINARY],
    )


def census_style_frame(n: int = 2000, seed: SeedLike = 0, n_noise: int = 2) -> pd.DataFrame:
    """
    Census-like table: wage income driven by education, weeks worked and
    an occupation code whose distribution depends on gender.

    Columns: age, educ (numeric code, categorical), occ (numeric code,
    categorical), wkswrkd, noise1..noiseK, gender (1 or 2), wageinc.

    Args:
        n (int): Rows
        seed (SeedLike): RNG seed
        n_noise (int): Pure-noise numeric columns

    Returns:
        pd.DataFrame: Raw table
    """
    rng = np.random.default_rng(seed)
    gender = rng.integers(1, 3, size=n)
    # occupations 100-300 are mostly gender 1, 400-600 mostly gender 2
    low = rng.integers(0, 3, size=n)
    high = rng.integers(3, 6, size=n)
    crossover = rng.random(n) < 0.2
    occ_index = np.where((gender == 1) != crossover, low, high)
    occ = np.asarray(OCCUPATIONS)[occ_index]
    educ = rng.choice([9, 10, 11, 12, 13, 14, 16], size=n)
    age = rng.integers(18, 70, size=n)
    weeks = rng.integers(10, 53, size=n)
    occ_effect = 4000.0 * occ_index
    wage = (
        5000.0
        + 3000.0 * (educ - 9)
        + 600.0 * weeks
        + 150.0 * (age - 18)
        + occ_effect
        + rng.normal(0.0, 15000.0, size=n)
    )
    frame = pd.DataFrame({
        "age": age,
        "educ": educ,
        "occ": occ,
        "wkswrkd": weeks,
    })
    for k in range(n_noise):
        frame[f"noise{k + 1}"] = rng.normal(0.0, 1.0, size=n)
    frame["gender"] = gender
    frame["wageinc"] = np.round(wage, 2)
    return frame


def write_census_style_csv(path: str, n: int = 2000, seed: SeedLike = 0,
                           n_noise: Optional[int] = 2) -> str:
    """Writes census_style_frame to a UTF-8 CSV and returns the path."""
    census_style_frame(n, seed, 2 if n_noise is None else n_noise).to_csv(path, index=False)
    return path
