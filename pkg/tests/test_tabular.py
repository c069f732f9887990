import numpy as np
import pandas as pd
import pytest

from edf_fair.errors import ConfigError, DataError
from edf_fair.tabular import (
    BINARY, CONTINUOUS, ONEHOT, DataSource, Dataset, DeweightSpec, delta_to_d, encode_frame,
    load_csv, rank_proxy_features, split_holdout,
)


def load_census(path):
    return load_csv(path, outcome="wageinc", sensitive=["gender"], c_features=["occ"],
                    categorical=["occ", "educ"])


def test_census_ingestion_encodes_and_standardizes(census_csv):
    data = load_census(census_csv)
    assert "gender" not in data.feature_names
    assert data.sensitive_names == ["gender"]
    assert data.sensitive_kind(0) == BINARY
    assert set(np.unique(data.s[:, 0])) == {0.0, 1.0}
    raw_gender = pd.read_csv(census_csv)["gender"].to_numpy()
    np.testing.assert_array_equal(data.s[:, 0], (raw_gender == 2).astype(float))
    assert data.y_kind == CONTINUOUS
    occ_cols = [n for n in data.feature_names if n.startswith("occ.")]
    assert occ_cols == ["occ.100", "occ.200", "occ.300", "occ.400", "occ.500", "occ.600"]
    assert np.array_equal(data.c_mask, np.array([n.startswith("occ.") for n in data.feature_names]))
    numeric = ~data.schema.onehot_mask
    np.testing.assert_allclose(data.x[:, numeric].mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(data.x[:, numeric].std(axis=0, ddof=1), 1.0, rtol=1e-10)
    # one-hot columns stay 0/1 and each row has exactly one occupation
    occ_idx = data.schema.indices_for("occ")
    assert set(np.unique(data.x[:, occ_idx])) == {0.0, 1.0}
    assert np.all(data.x[:, occ_idx].sum(axis=1) == 1.0)
    assert data.source.sha256 is not None


def test_destandardize_round_trip(census_csv):
    data = load_census(census_csv)
    raw = pd.read_csv(census_csv)
    np.testing.assert_allclose(data.destandardize()[:, data.feature_names.index("age")], raw["age"], rtol=1e-12)


def test_arrays_are_read_only(proxy_data):
    with pytest.raises(ValueError):
        proxy_data.x[0, 0] = 1.0


def test_missing_column_is_named(census_csv):
    with pytest.raises(DataError, match="nosuch"):
        load_csv(census_csv, outcome="wageinc", sensitive=["gender"], c_features=["nosuch"])


def test_sensitive_cannot_be_in_c(census_csv):
    with pytest.raises(DataError, match="S must be excluded"):
        load_csv(census_csv, outcome="wageinc", sensitive=["gender"], c_features=["gender"])


def test_constant_and_missing_values(tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"a": [1, 1, 1], "b": [1, 2, 3], "s": [0, 1, 0], "y": [1.0, 2.0, 3.0]}).to_csv(path, index=False)
    with pytest.raises(DataError, match="constant"):
        load_csv(str(path), "y", ["s"], ["b"])
    pd.DataFrame({"a": [1, None, 3], "b": [1, 2, 3], "s": [0, 1, 0], "y": [1.0, 2.0, 3.0]}).to_csv(path, index=False)
    with pytest.raises(DataError, match="Missing values"):
        load_csv(str(path), "y", ["s"], ["b"])


def test_categorical_sensitive_expands_and_labels_outcome(tmp_path):
    path = tmp_path / "compas.csv"
    frame = pd.DataFrame({
        "priors": [0, 3, 1, 5, 2, 0],
        "race": ["white", "black", "hispanic", "black", "white", "hispanic"],
        "recid": ["no", "yes", "no", "yes", "yes", "no"],
    })
    frame.to_csv(path, index=False)
    data = load_csv(str(path), outcome="recid", sensitive=["race"], c_features=["priors"])
    assert data.sensitive_names == ["race.black", "race.hispanic", "race.white"]
    assert all(data.sensitive_kind(j) == BINARY for j in range(3))
    assert data.y_kind == BINARY
    assert data.schema.positive_label == "yes"
    np.testing.assert_array_equal(data.y, [0, 1, 0, 1, 1, 0])


def test_encode_frame_rejects_unseen_category(census_csv):
    data = load_census(census_csv)
    frame = pd.read_csv(census_csv).head(5).copy()
    x, s, y = encode_frame(frame, data.schema, data.standardization)
    np.testing.assert_allclose(x, data.x[:5], rtol=1e-12, atol=1e-12)
    frame.loc[0, "occ"] = 999
    with pytest.raises(DataError, match="not seen in training"):
        encode_frame(frame, data.schema, data.standardization)


def test_two_valued_sensitive_column_is_recoded_on_new_rows(census_csv):
    data = load_census(census_csv)
    column = data.schema.sensitive[0]
    assert (column.baseline, column.category) == ("1", "2")
    frame = pd.read_csv(census_csv).head(8).copy()
    _, s, _ = encode_frame(frame, data.schema, data.standardization, require_sensitive=True)
    np.testing.assert_array_equal(s[:, 0], data.s[:8, 0])
    frame.loc[0, "gender"] = 3
    with pytest.raises(DataError, match="not seen in training"):
        encode_frame(frame, data.schema, data.standardization)


def test_from_arrays_recodes_two_valued_sensitive_column():
    rng = np.random.default_rng(2)
    s = rng.choice([1.0, 2.0], size=30)
    data = Dataset.from_arrays(rng.normal(size=(30, 2)), rng.normal(size=30), s, [True, False])
    assert data.sensitive_kind(0) == BINARY
    np.testing.assert_array_equal(data.s[:, 0], (s == 2.0).astype(float))
    assert set(np.unique(s)) == {1.0, 2.0}


def test_single_row_dataset_is_rejected(proxy_data):
    with pytest.raises(DataError, match="at least 2 rows"):
        proxy_data.subset([0])


def test_split_holdout_is_deterministic_and_restandardizes(proxy_data):
    train_a, test_a = split_holdout(proxy_data, 200, seed=4)
    train_b, test_b = split_holdout(proxy_data, 200, seed=4)
    assert (train_a.n, test_a.n) == (1000, 200)
    np.testing.assert_array_equal(test_a.x, test_b.x)
    np.testing.assert_allclose(train_a.x.mean(axis=0), 0.0, atol=1e-10)
    _, other = split_holdout(proxy_data, 200, seed=5)
    assert not np.array_equal(other.y, test_a.y)
    with pytest.raises(DataError):
        split_holdout(proxy_data, proxy_data.n, seed=0)
    small = proxy_data.subset(range(100))
    partitions = {tuple(split_holdout(small, 20, seed=k)[1].y) for k in range(10)}
    assert len(partitions) == 10
    with pytest.raises(ConfigError):
        split_holdout(proxy_data, 0, seed=0)


def test_rank_proxies_puts_occupation_first(census_csv):
    data = load_census(census_csv)
    ranking = rank_proxy_features(data, 0)
    top = [name for name, _ in ranking[:6]]
    assert all(name.startswith("occ.") for name in top)
    scores = [score for _, score in ranking]
    assert scores == sorted(scores, reverse=True)
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_deweight_spec_constructors(census_csv):
    data = load_census(census_csv)
    spec = DeweightSpec.common(data.c_mask, delta=25.0, factor=0.5)
    np.testing.assert_allclose(spec.ridge_d[data.c_mask], 5.0)
    assert np.all(spec.ridge_d[~data.c_mask] == 0.0)
    assert np.all(spec.factor[~data.c_mask] == 1.0)
    per = DeweightSpec.per_feature(data, factors={"occ": 0.2})
    assert np.all(per.factor[data.schema.indices_for("occ")] == 0.2)
    with pytest.raises(ConfigError, match="not in C"):
        DeweightSpec.per_feature(data, deltas={"age": 4.0})
    with pytest.raises(ConfigError):
        DeweightSpec(np.zeros(2), np.array([1.0, 1.5]))
    with pytest.raises(ConfigError):
        DeweightSpec(np.zeros(data.p), np.ones(data.p)).check(np.ones(data.p + 1, dtype=bool))
    assert delta_to_d(625.0) == 25.0
    with pytest.raises(ConfigError):
        delta_to_d(-1.0)


def test_with_sensitive_features_appends_s_outside_c(proxy_data):
    full = proxy_data.with_sensitive_features()
    assert full.p == proxy_data.p + 1
    assert full.feature_names[-1] == "s"
    assert not full.c_mask[-1]
    np.testing.assert_array_equal(full.x[:, -1], proxy_data.s[:, 0])


def test_categorical_sensitive_source_drops_one_level_for_regressions(census_csv):
    data = load_csv(census_csv, outcome="wageinc", sensitive=["gender"], c_features=["occ"],
                    categorical=["occ", "gender"])
    assert data.sensitive_names == ["gender.1", "gender.2"]
    assert data.sensitive_basis().tolist() == [0]
    full = data.with_sensitive_features()
    assert full.p == data.p + 1
    assert full.feature_names[-1] == "gender.1"
    np.testing.assert_array_equal(full.x[:, -1], data.s[:, 0])


def test_data_source_from_dict_validation(tmp_path):
    src = DataSource.from_dict({"path": "d.csv", "outcome": "y", "sensitive": "s", "c_features": ["x1"]},
                               base_dir=str(tmp_path))
    assert src.path == str(tmp_path / "d.csv")
    assert src.sensitive == ("s",)
    with pytest.raises(ConfigError, match="c_features"):
        DataSource.from_dict({"path": "d.csv", "outcome": "y", "sensitive": ["s"]})


def test_from_arrays_infers_kinds():
    rng = np.random.default_rng(1)
    data = Dataset.from_arrays(rng.normal(size=(20, 2)), rng.integers(0, 2, 20), rng.normal(size=20), [True, False])
    assert data.y_kind == BINARY
    assert data.sensitive_kind(0) == CONTINUOUS
    assert data.schema.columns[0].kind != ONEHOT
