import json
import math
import os

import numpy as np
import pytest

from edf_fair.errors import ConfigError, DataError
from edf_fair.harness import (
    FOREST, KNN, LINEAR, TWOSTAGE, ExperimentConfig, ExperimentRunner, ReplicationRow, ReplicationTable,
    aggregate, check_grid_value, deweight_spec, fit_family, format_grid_value, load_records,
    replication_seeds, run_experiment, select_deweight, write_outputs,
)
from edf_fair.fairness import build_W
from edf_fair.synthetic import proxy_fixture
from edf_fair.tabular import split_holdout
from edf_fair.utils import dumps_canonical


def experiment(family, grid, replications=3, holdout_size=200, **kwargs):
    return ExperimentConfig(data=None, family=family, deweight_grid=grid, replications=replications,
                            holdout_size=holdout_size, **kwargs)


@pytest.mark.acceptance
def test_linear_deweighting_lowers_rho_at_modest_cost():
    data = proxy_fixture(n=3000, seed=2024)
    result = run_experiment(experiment(LINEAR, [0.0, 1e6], replications=100, holdout_size=1000), data)
    free, heavy = result.table.rows
    assert free.n_replications == heavy.n_replications == 100
    combined_se = math.sqrt(free.se_rho[0] ** 2 + heavy.se_rho[0] ** 2)
    assert free.mean_rho[0] - heavy.mean_rho[0] >= 3 * combined_se
    assert heavy.mean_utility / free.mean_utility <= 1.25


@pytest.mark.acceptance
@pytest.mark.parametrize("family, grid, params", [
    (LINEAR, [0.0, 1e6], {}),
    (KNN, [1.0, 0.0], {}),
    (FOREST, [1.0, 0.0], {"n_trees": 30, "min_node_size": 20}),
    (TWOSTAGE, [0.0, 1e6], {"include_sensitive": True}),
])
def test_every_family_trades_rho_for_deweighting(family, grid, params):
    data = proxy_fixture(n=1500, seed=77)
    result = run_experiment(experiment(family, grid, replications=20, holdout_size=500, family_params=params), data)
    none, strongest = result.table.rows
    assert strongest.mean_rho[0] < none.mean_rho[0]


@pytest.mark.acceptance
def test_results_do_not_depend_on_thread_count():
    data = proxy_fixture(n=800, seed=5)
    config = experiment(KNN, [1.0, 0.5, 0.0], replications=6)
    serial = run_experiment(config, data, threads=1)
    threaded = run_experiment(config, data, threads=8)
    assert serial.table.to_text() == threaded.table.to_text()
    assert dumps_canonical(serial.summary()) == dumps_canonical(threaded.summary())
    assert serial.records == threaded.records


def test_records_reaggregate_to_the_table(proxy_data, tmp_path):
    result = run_experiment(experiment(LINEAR, [0.0, 25.0, {"x1": 625.0}]), proxy_data)
    paths = write_outputs(result, str(tmp_path / "out"))
    assert set(paths) == {"records", "summary", "table"}
    assert aggregate(load_records(paths["records"])) == result.table
    with open(paths["table"], encoding="utf-8") as f:
        assert f.read() == result.table.to_text()
    with open(paths["summary"], encoding="utf-8") as f:
        summary = json.load(f)
    assert summary["evaluated_on"] == "holdout"
    assert summary["table"]["rows"][0]["n_replications"] == 3
    assert "se" in summary["table"]["rows"][0]["rho_squared"][0]
    lines = result.table.to_text().splitlines()
    assert [c.strip() for c in lines[0].split("|")] == ["deweight", "MAPE", "rho^2"]
    assert lines[-1].startswith("x1=625")


def test_common_random_numbers_across_grid(proxy_data):
    config = experiment(LINEAR, [0.0, 0.0], replications=2)
    result = ExperimentRunner(config, proxy_data).run()
    first, second = result.table.rows
    assert first.mean_utility == second.mean_utility
    assert first.mean_rho == second.mean_rho


def test_replication_seeds():
    a = replication_seeds(7, 0)
    assert a[0].generate_state(4).tolist() == replication_seeds(7, 0)[0].generate_state(4).tolist()
    assert a[1] == replication_seeds(7, 0)[1]
    assert a[1] != replication_seeds(7, 1)[1]
    assert a[1] != replication_seeds(8, 0)[1]


def test_failure_names_grid_value_and_replication(proxy_csv):
    from edf_fair.tabular import load_csv

    data = load_csv(proxy_csv, "y", ["s"], ["x1"])
    config = experiment(KNN, [1.0], replications=1, holdout_size=100, family_params={"k": 5000})
    with pytest.raises(ConfigError, match="grid value 1, replication 0"):
        run_experiment(config, data)


def test_runner_validation(proxy_data, make_dataset):
    with pytest.raises(DataError, match="holdout_size"):
        ExperimentRunner(experiment(LINEAR, [0.0], holdout_size=proxy_data.n), proxy_data)
    with pytest.raises(ConfigError, match="no data source"):
        ExperimentRunner(experiment(LINEAR, [0.0]))
    continuous = make_dataset(1, 300, 2)
    with pytest.raises(ConfigError, match="continuous"):
        ExperimentRunner(experiment(LINEAR, [0.0], proxy_adequacy={"sensitive": "s1"}), continuous)
    with pytest.raises(ConfigError, match="not a sensitive column"):
        ExperimentRunner(experiment(LINEAR, [0.0], proxy_adequacy={"sensitive": "race"}), continuous)


def test_proxy_adequacy_columns(proxy_data):
    result = run_experiment(experiment(LINEAR, [0.0, 1e4], proxy_adequacy={"sensitive": "s"}), proxy_data)
    assert result.table.proxy_categories == ("s.0", "s.1")
    header = [c.strip() for c in result.table.to_text().splitlines()[0].split("|")]
    assert header == ["deweight", "MAPE", "rho^2", "s.0 proxy rho^2", "s.1 proxy rho^2"]
    assert all(0.5 < v <= 1.0 for v in result.table.rows[0].mean_proxy)


def test_twostage_proxy_adequacy_uses_sensitive_term(proxy_data):
    config = experiment(TWOSTAGE, [0.0], replications=1, proxy_adequacy={"sensitive": "s"})
    record = run_experiment(config, proxy_data).records[0]
    assert [label for label, _ in record.proxy] == ["s.0", "s.1"]


def test_config_from_dict(tmp_path):
    payload = {
        "data": {"path": "proxy.csv", "outcome": "y", "sensitive": ["s"], "c_features": ["x1"]},
        "family": "knn",
        "deweight_grid": [1.0, {"x1": 0.25}],
        "family_params": {"k": 10},
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    config = ExperimentConfig.from_json(str(path))
    assert config.data.path == str(tmp_path / "proxy.csv")
    assert config.holdout_size == 1000 and config.aux_k == 25 and config.replications == 1
    assert config.deweight_grid == (1.0, {"x1": 0.25})
    assert ExperimentConfig.from_dict(config.to_dict()) == config

    for bad in (
        dict(payload, extra=1),
        {k: v for k, v in payload.items() if k != "family"},
        dict(payload, deweight_grid=[2.0]),
        dict(payload, deweight_grid=[]),
        dict(payload, family_params={"n_trees": 5}),
        dict(payload, family="svm"),
        dict(payload, replications=0),
        dict(payload, threshold=1.0),
        dict(payload, aux_family="tree"),
    ):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(bad)


def test_grid_value_checks():
    assert check_grid_value(LINEAR, 625) == 625.0
    assert check_grid_value(FOREST, {"occ": 0}) == {"occ": 0.0}
    for family, value in ((TWOSTAGE, {"x1": 1.0}), (LINEAR, -1.0), (KNN, 1.5), (LINEAR, float("nan")),
                          (LINEAR, True), (FOREST, {})):
        with pytest.raises(ConfigError):
            check_grid_value(family, value)
    assert format_grid_value(25.0) == "25"
    assert format_grid_value({"b": 0.5, "a": 1.0}) == "a=1,b=0.5"


def test_per_feature_grid_value_matches_common(proxy_data):
    scalar = fit_family(LINEAR, proxy_data, 100.0, {})
    mapped = fit_family(LINEAR, proxy_data, {"x1": 100.0}, {})
    np.testing.assert_allclose(mapped.coefficients, scalar.coefficients, rtol=1e-12)
    spec = deweight_spec(KNN, proxy_data, 0.25)
    assert spec.factor.tolist() == [0.25, 1.0]


def make_table(rows):
    return ReplicationTable(
        rows=tuple(ReplicationRow(deweight=d, mean_utility=u, se_utility=0.0, mean_rho=(r,), se_rho=(0.0,),
                                  n_replications=500) for d, u, r in rows),
        utility_name="MAPE",
        categories=("gender",),
    )


def test_select_deweight():
    table = make_table([(1.0, 25631.21, 0.22), (625.0, 25523.83, 0.21), (15625.0, 25700.00, 0.15)])
    choice = select_deweight(table, 0.21)
    assert choice.deweight == 625.0 and choice.feasible
    assert select_deweight(table, 0.16).deweight == 15625.0
    fallback = select_deweight(table, 0.10)
    assert fallback.deweight == 15625.0 and not fallback.feasible
    assert fallback.to_dict()["max_mean_rho_squared"] == 0.15
    tied = make_table([(0.0, 10.0, 0.1), (1.0, 10.0, 0.05)])
    assert select_deweight(tied, 0.2).deweight == 0.0
    with pytest.raises(ConfigError):
        select_deweight(table, 1.5)


def test_aggregate_standard_errors():
    from edf_fair.harness import ReplicationRecord

    records = [ReplicationRecord(replication=r, grid_index=0, deweight=0.0, utility_name="OPM", utility=u,
                                 rho=(("s", v),)) for r, (u, v) in enumerate([(0.2, 0.1), (0.3, 0.3), (0.4, 0.2)])]
    row = aggregate(list(reversed(records))).rows[0]
    assert row.mean_utility == pytest.approx(0.3)
    assert row.se_utility == pytest.approx(0.1 / math.sqrt(3))
    assert row.mean_rho[0] == pytest.approx(0.2)
    assert aggregate(records[:1]).rows[0].se_utility == 0.0
    with pytest.raises(DataError):
        aggregate([])


def test_load_records_rejects_malformed_lines(tmp_path):
    path = tmp_path / "records.jsonl"
    path.write_text('{"replication": 0}\n', encoding="utf-8")
    with pytest.raises(DataError, match=":1:"):
        load_records(str(path))
    with pytest.raises(DataError, match="not found"):
        load_records(os.path.join(str(tmp_path), "missing.jsonl"))


def test_unpenalized_grid_matches_direct_ols_holdout(proxy_data):
    config = experiment(LINEAR, [0.0], replications=3, master_seed=17)
    result = run_experiment(config, proxy_data)
    for record in result.records:
        split_seed, _ = replication_seeds(17, record.replication)
        train, test = split_holdout(proxy_data, 200, split_seed)
        coef = np.linalg.lstsq(np.column_stack([np.ones(train.n), train.x]), train.y, rcond=None)[0]
        pred = coef[0] + test.x @ coef[1:]
        w = build_W(train, test, 0, config.aux_family, config.aux_k)
        assert record.utility_name == "MAPE"
        assert record.utility == pytest.approx(np.mean(np.abs(test.y - pred)), rel=1e-9)
        assert record.rho[0][1] == pytest.approx(np.corrcoef(pred, w)[0, 1] ** 2, rel=1e-8, abs=1e-12)


def test_constant_predictions_record_zero_rho(make_dataset):
    data = make_dataset(8, 300, 2, n_c=2)
    result = run_experiment(experiment(KNN, [1.0, 0.0], replications=2, holdout_size=100), data)
    unweighted, flat = result.table.rows
    assert unweighted.mean_rho[0] > 0.0
    assert flat.mean_rho[0] == 0.0
    assert all(rec.rho[0][1] == 0.0 for rec in result.records if rec.deweight == 0.0)
