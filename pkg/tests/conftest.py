import os

import numpy as np
import pandas as pd
import pytest

from app_utils import ConfigManager, LoggingManager
from edf_fair.synthetic import proxy_arrays, proxy_fixture, write_census_style_csv
from edf_fair.tabular import Dataset

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture(autouse=True)
def repo_settings(monkeypatch):
    """Every test sees the repository config.toml and fresh loggers."""
    monkeypatch.delenv("EDF_THREADS", raising=False)
    ConfigManager.reset()
    LoggingManager.reset()
    ConfigManager.get_config(os.path.join(REPO_ROOT, "config.toml"))
    yield
    LoggingManager.reset()
    ConfigManager.reset()


@pytest.fixture
def make_dataset():
    """Factory for random Gaussian datasets: make_dataset(seed, n, p, n_c=1, q=1, binary_s=False)."""

    def _make(seed, n, p, n_c=1, q=1, binary_s=False, binary_y=False):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, p))
        if binary_s:
            s = rng.binomial(1, 0.5, size=(n, q)).astype(float)
        else:
            s = rng.normal(size=(n, q))
        y = x @ rng.normal(size=p) + rng.normal(size=n)
        if binary_y:
            y = (y > 0).astype(float)
        c_mask = np.zeros(p, dtype=bool)
        c_mask[:n_c] = True
        return Dataset.from_arrays(x, y, s, c_mask)

    return _make


@pytest.fixture(scope="session")
def proxy_data():
    return proxy_fixture(n=1200, seed=11)


@pytest.fixture
def proxy_csv(tmp_path):
    """Proxy fixture as a CSV with columns x1, x2, s, y."""
    x, y, s = proxy_arrays(600, seed=5)
    path = tmp_path / "proxy.csv"
    pd.DataFrame({"x1": x[:, 0], "x2": x[:, 1], "s": s, "y": y}).to_csv(path, index=False)
    return str(path)


@pytest.fixture
def census_csv(tmp_path):
    return write_census_style_csv(str(tmp_path / "census.csv"), n=2000, seed=3)
