import numpy as np
import pytest

from edf_fair.errors import ConfigError, DataError, SingularMatrixError
from edf_fair.linear import (
    AUGMENTED, CLOSED_FORM, RidgeDeweightModel, augmented_design, c_coefficient_norm, coefficient_table,
    fit_augmented, fit_closed_form, fit_linear, penalized_norm, predict,
)
from edf_fair.tabular import Dataset, DeweightSpec


def random_instance(rng):
    n = int(rng.integers(20, 201))
    p = int(rng.integers(1, 11))
    x = rng.normal(size=(n, p)) * rng.uniform(0.5, 3.0, size=p)
    y = x @ rng.normal(size=p) + rng.normal(size=n)
    c_mask = rng.random(p) < 0.5
    data = Dataset.from_arrays(x, y, rng.normal(size=n), c_mask)
    d = np.where(c_mask, rng.uniform(0.0, 30.0, size=p), 0.0)
    return data, DeweightSpec(d, np.ones(p))


@pytest.mark.acceptance
def test_closed_form_and_augmented_agree():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        data, spec = random_instance(rng)
        a = fit_closed_form(data, spec)
        b = fit_augmented(data, spec)
        scale = max(np.linalg.norm(a.coefficients), 1e-12)
        assert np.linalg.norm(a.coefficients - b.coefficients) / scale <= 1e-8
        assert a.intercept == pytest.approx(b.intercept, rel=1e-8, abs=1e-8)


@pytest.mark.acceptance
def test_zero_penalty_is_ols():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(20, 201))
        p = int(rng.integers(1, 11))
        x = rng.normal(size=(n, p))
        y = x @ rng.normal(size=p) + 3.0 + rng.normal(size=n)
        data = Dataset.from_arrays(x, y, rng.normal(size=n), np.ones(p, dtype=bool))
        model = fit_closed_form(data, DeweightSpec.none(p))
        design = np.column_stack([np.ones(n), data.x])
        oracle = np.linalg.solve(design.T @ design, design.T @ data.y)
        np.testing.assert_allclose(model.intercept, oracle[0], rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(model.coefficients, oracle[1:], rtol=1e-10, atol=1e-10)


def test_large_penalty_shrinks_only_c(make_dataset):
    data = make_dataset(0, 300, 4, n_c=2)
    free = fit_closed_form(data, DeweightSpec.none(4))
    heavy = fit_closed_form(data, DeweightSpec.common(data.c_mask, delta=1e8))
    assert np.all(np.abs(heavy.coefficients[:2]) < 1e-3)
    assert c_coefficient_norm(heavy, data.c_mask) < c_coefficient_norm(free, data.c_mask)
    assert np.all(np.abs(heavy.coefficients[2:]) > 0.0)
    assert penalized_norm(free) == 0.0


def test_c_norm_decreases_along_penalty_path(make_dataset):
    data = make_dataset(1, 200, 3, n_c=2)
    norms = [c_coefficient_norm(fit_closed_form(data, DeweightSpec.common(data.c_mask, delta=delta)), data.c_mask)
             for delta in (0.0, 1.0, 25.0, 625.0, 15625.0)]
    assert all(a >= b for a, b in zip(norms, norms[1:]))


def test_augmented_design_shape(make_dataset):
    data = make_dataset(2, 50, 3, n_c=1)
    a, b = augmented_design(data, DeweightSpec.common(data.c_mask, delta=4.0))
    assert a.shape == (53, 3) and b.shape == (53,)
    np.testing.assert_array_equal(a[50:], np.diag([2.0, 0.0, 0.0]))
    assert np.all(b[50:] == 0.0)


def test_collinear_design_without_penalty_is_singular():
    rng = np.random.default_rng(3)
    base = rng.normal(size=40)
    x = np.column_stack([base, 2.0 * base + 1.0])
    data = Dataset.from_arrays(x, rng.normal(size=40), rng.normal(size=40), [True, False])
    with pytest.raises(SingularMatrixError):
        fit_closed_form(data, DeweightSpec.none(2))
    with pytest.raises(SingularMatrixError):
        fit_augmented(data, DeweightSpec.none(2))
    # penalizing one of the collinear columns makes the system solvable
    model = fit_closed_form(data, DeweightSpec.common(data.c_mask, delta=1.0))
    assert np.all(np.isfinite(model.coefficients))


def test_deweighting_outside_c_is_rejected(make_dataset):
    data = make_dataset(4, 30, 2, n_c=1)
    with pytest.raises(ConfigError):
        fit_closed_form(data, DeweightSpec(np.array([0.0, 1.0]), np.ones(2)))
    with pytest.raises(ConfigError):
        fit_linear(data, DeweightSpec.none(2), method="lasso")


def test_predict_and_serialization(make_dataset):
    data = make_dataset(5, 80, 3, binary_y=True)
    model = fit_linear(data, DeweightSpec.common(data.c_mask, delta=9.0), method=AUGMENTED)
    assert model.fit_method == AUGMENTED
    np.testing.assert_allclose(predict(model, data.x[0]), model.predict(data.x[:1]))
    proba = model.predict_proba(data.x)
    assert proba.shape == (80, 2) and np.all((proba >= 0) & (proba <= 1))
    restored = RidgeDeweightModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(restored.predict(data.x), model.predict(data.x))
    with pytest.raises(DataError):
        model.predict(np.ones((2, 4)))
    rows = coefficient_table(model)
    assert [r[0] for r in rows] == ["x1", "x2", "x3"]
    assert rows[0][1] == pytest.approx(9.0)
    assert fit_closed_form(data, DeweightSpec.none(3)).fit_method == CLOSED_FORM


def test_orthogonal_columns_outside_c_do_not_move():
    rng = np.random.default_rng(12)
    raw = rng.normal(size=(120, 4))
    q, _ = np.linalg.qr(raw - raw.mean(axis=0))
    y = q @ np.array([3.0, -2.0, 1.0, 0.5]) + rng.normal(size=120)
    c_mask = np.array([True, True, False, False])
    data = Dataset.from_arrays(q, y, rng.normal(size=120), c_mask)
    free = fit_closed_form(data, DeweightSpec.none(4))
    for delta in (1.0, 625.0, 1e8):
        model = fit_closed_form(data, DeweightSpec.common(c_mask, delta=delta))
        np.testing.assert_allclose(model.coefficients[~c_mask], free.coefficients[~c_mask], rtol=1e-10, atol=1e-10)
        xc = data.x[:, c_mask]
        expected = (xc.T @ (data.y - data.y.mean())) / (np.sum(xc * xc, axis=0) + delta)
        np.testing.assert_allclose(model.coefficients[c_mask], expected, rtol=1e-8, atol=1e-12)


def test_huge_penalty_eliminates_c_relative_to_norm(make_dataset):
    data = make_dataset(6, 300, 4, n_c=2)
    model = fit_closed_form(data, DeweightSpec.common(data.c_mask, delta=1e16))
    bound = 1e-6 * np.linalg.norm(model.coefficients)
    assert np.all(np.abs(model.coefficients[data.c_mask]) <= bound)
    assert np.linalg.norm(model.coefficients) > 0.0
