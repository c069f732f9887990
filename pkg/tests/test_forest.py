import numpy as np
import pytest

from edf_fair.errors import ConfigError, DataError
from edf_fair.forest import (
    LEAF, ForestConfig, ForestModel, best_split, draw_candidates, forest_fit, forest_oob_predict,
    forest_predict, forest_predict_proba, grow_tree, oob_error, split_counts,
)
from edf_fair.synthetic import proxy_fixture
from edf_fair.tabular import Dataset, DeweightSpec


@pytest.fixture(scope="module")
def small_proxy():
    return proxy_fixture(n=200, seed=3)


@pytest.mark.acceptance
def test_zero_weight_feature_is_never_split(small_proxy):
    spec = DeweightSpec.common(small_proxy.c_mask, factor=0.0)
    model = forest_fit(small_proxy, ForestConfig.from_settings(spec, n_trees=500, seed=1))
    counts = split_counts(model)
    assert counts[0] == 0
    assert counts[1] > 0


@pytest.mark.acceptance
def test_split_share_is_monotone_in_factor(small_proxy):
    for seed in range(20):
        shares = []
        for factor in (1.0, 0.5, 0.1):
            spec = DeweightSpec.common(small_proxy.c_mask, factor=factor)
            model = forest_fit(small_proxy, ForestConfig.from_settings(spec, n_trees=40, mtry=1, seed=seed))
            counts = split_counts(model)
            shares.append(counts[0] / counts.sum())
        assert shares[0] >= shares[1] >= shares[2], (seed, shares)


def test_uniform_weights_use_features_evenly():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(300, 4))
    y = rng.normal(size=300)
    data = Dataset.from_arrays(x, y, rng.normal(size=300), np.zeros(4, dtype=bool))
    model = forest_fit(data, ForestConfig(n_trees=60, mtry=1, seed=2))
    share = split_counts(model) / split_counts(model).sum()
    assert np.all((share > 0.15) & (share < 0.35))


def test_constant_outcome_predicts_exactly():
    rng = np.random.default_rng(1)
    data = Dataset.from_arrays(rng.normal(size=(50, 3)), np.full(50, 7.0), rng.normal(size=50), [True, False, False])
    model = forest_fit(data, ForestConfig(n_trees=10, seed=0))
    assert np.all(forest_predict(model, data.x) == 7.0)
    assert all(t.node_count == 1 for t in model.trees)


def test_serial_and_threaded_forests_are_identical(small_proxy):
    serial = forest_fit(small_proxy, ForestConfig(n_trees=20, seed=5, n_jobs=1))
    threaded = forest_fit(small_proxy, ForestConfig(n_trees=20, seed=5, n_jobs=4))
    np.testing.assert_array_equal(forest_predict(serial, small_proxy.x), forest_predict(threaded, small_proxy.x))
    again = forest_fit(small_proxy, ForestConfig(n_trees=20, seed=5))
    assert serial.to_dict() == again.to_dict()


def test_classification_probabilities_and_oob():
    data = proxy_fixture(n=300, seed=8, binary_outcome=True)
    model = forest_fit(data, ForestConfig(n_trees=50, seed=3))
    proba = forest_predict_proba(model, data.x)
    assert proba.shape == (300, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    np.testing.assert_allclose(forest_predict(model, data.x), proba[:, 1])
    oob = forest_oob_predict(model, data)
    assert np.isfinite(oob).mean() > 0.95
    assert 0.0 <= oob_error(model, data) < 0.5


def test_best_split_finds_step():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    feature, threshold, gain = best_split(x, y, [0], classification=False)
    assert feature == 0 and threshold == 1.5 and gain > 0
    assert best_split(x, np.ones(4), [0], classification=False) is None
    labels = np.array([0.0, 0.0, 1.0, 1.0])
    assert best_split(x, labels, [0], classification=True)[1] == 1.5


def test_draw_candidates_respects_zero_weights():
    rng = np.random.default_rng(0)
    for _ in range(200):
        chosen = draw_candidates(np.array([0.0, 1.0, 0.5, 0.0]), 3, rng)
        assert set(chosen) <= {1, 2}
        assert len(chosen) == len(set(chosen)) == 2


def test_config_validation(small_proxy):
    with pytest.raises(ConfigError):
        ForestConfig(n_trees=0)
    with pytest.raises(ConfigError):
        ForestConfig(sampling_weights=(0.0, 0.0))
    with pytest.raises(ConfigError):
        forest_fit(small_proxy, ForestConfig(mtry=3))
    with pytest.raises(ConfigError):
        forest_fit(small_proxy, ForestConfig(sampling_weights=(1.0, 1.0, 1.0)))
    tiny = small_proxy.subset(range(5))
    with pytest.raises(DataError):
        forest_fit(tiny, ForestConfig(n_trees=2))
    assert ForestConfig.from_settings().n_trees == 500


def test_round_trip(small_proxy):
    model = forest_fit(small_proxy, ForestConfig(n_trees=5, seed=9))
    restored = ForestModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(restored.predict(small_proxy.x), model.predict(small_proxy.x))


def test_adjacent_floats_split_into_nonempty_children():
    lo = np.nextafter(1.0, 0.0)
    assert 0.5 * (lo + 1.0) == 1.0
    x = np.array([[lo], [lo], [1.0], [1.0]])
    y = np.array([0.0, 0.0, 4.0, 4.0])
    _, threshold, _ = best_split(x, y, [0], classification=False)
    assert lo <= threshold < 1.0
    config = ForestConfig(n_trees=1, min_node_size=1, bootstrap=False).resolve(1)
    tree = grow_tree(x, y, False, config, np.random.default_rng(0))
    assert tree.node_count == 3
    assert np.all(np.isfinite(tree.value))
    np.testing.assert_array_equal(tree.leaf_values(x)[:, 0], y)


def test_small_tree_matches_hand_trace():
    x = np.arange(6, dtype=float).reshape(-1, 1)
    y = np.array([1.0, 1.0, 1.0, 5.0, 5.0, 9.0])
    config = ForestConfig(n_trees=1, min_node_size=1, bootstrap=False).resolve(1)
    tree = grow_tree(x, y, False, config, np.random.default_rng(0))
    np.testing.assert_array_equal(tree.feature, [0, LEAF, 0, LEAF, LEAF])
    np.testing.assert_array_equal(tree.threshold, [2.5, 0.0, 4.5, 0.0, 0.0])
    np.testing.assert_array_equal(tree.left, [1, LEAF, 3, LEAF, LEAF])
    np.testing.assert_array_equal(tree.right, [2, LEAF, 4, LEAF, LEAF])
    np.testing.assert_allclose(tree.value[:, 0], [22.0 / 6.0, 1.0, 19.0 / 3.0, 5.0, 9.0])
    assert tree.oob_rows.size == 0
    queries = np.array([[-10.0], [2.5], [2.6], [4.5], [100.0]])
    np.testing.assert_array_equal(tree.leaf_values(queries)[:, 0], [1.0, 1.0, 5.0, 5.0, 9.0])


def test_step_function_is_learned_out_of_bag():
    rng = np.random.default_rng(4)
    x = rng.uniform(-1.0, 1.0, size=(200, 1))
    y = (x[:, 0] > 0).astype(float)
    data = Dataset.from_arrays(x, y, rng.normal(size=200), [False])
    model = forest_fit(data, ForestConfig(n_trees=100, min_node_size=10, seed=1))
    assert oob_error(model, data) <= 0.05


def test_regression_predictions_stay_within_outcome_range(small_proxy):
    model = forest_fit(small_proxy, ForestConfig(n_trees=30, seed=2))
    rng = np.random.default_rng(6)
    far = 10.0 * rng.normal(size=(500, small_proxy.p))
    for pred in (forest_predict(model, far), forest_predict(model, small_proxy.x)):
        assert np.all(pred >= small_proxy.y.min())
        assert np.all(pred <= small_proxy.y.max())
