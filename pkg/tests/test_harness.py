import csv
import json

import pytest

from covsteer.errors import ConfigError
from covsteer.harness import (
    CorpusSpec,
    ExperimentConfig,
    goal_report,
    load_curves,
    net_savings,
    run_experiment,
    savings,
    sign_test,
)
from covsteer.selectors import ModelHyper
from covsteer.seloop import LoopConfig


def small(**kw):
    base = dict(methods=("RD", "IF"), repeats=2, corpus=CorpusSpec(seed=3, n_tests=120, len_range=(20, 40)),
                loop=LoopConfig(warmup_n=20, batch=25, hyper=ModelHyper(trees=20, subsample=64)),
                goals=(40.0, 45.0))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def result(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    return run_experiment(small(), out, jobs=1), out


def test_net_savings_examples():
    assert net_savings(0, 12, 0.5) == -0.5
    assert net_savings(1274, 12, 0.27) == pytest.approx(254.53, abs=1e-9)
    assert net_savings(211, 12, 0.59) == pytest.approx(41.61, abs=1e-9)


def test_savings_examples():
    saved, pct = savings(4735, 3461)
    assert saved == 1274 and pct == pytest.approx(26.90, abs=0.01)
    assert savings(100, 100) == (0, 0.0)


def test_sign_test_by_hand():
    # 9 wins of 10: (C(10,9) + C(10,10)) / 1024
    assert sign_test([1] * 9 + [5], [2] * 10) == (9, 1, 11 / 1024)
    assert sign_test([1, None], [None, None]) == (1, 0, 0.5)
    assert sign_test([3, 3], [3, 3]) == (0, 0, 1.0)


def test_outputs_exist(result):
    _, out = result
    for name in ("config.json", "curves.csv", "table.csv", "costs.csv", "curves.svg", "summary.md"):
        assert (out / name).is_file()
    assert (out / "runs" / "IF_1" / "history.jsonl").is_file()
    assert (out / "curves.svg").read_text().startswith("<svg")


def test_rd_self_savings_zero(result):
    res, _ = result
    for r in res.table():
        if r["method"] == "RD" and "mean_tests" in r:
            assert r["saved_tests"] == 0 and r["savings_percent"] == 0


def test_table_matches_histories(result):
    res, out = result
    rows = {(r["method"], float(r["goal"])): r for r in csv.DictReader((out / "table.csv").open())}
    for m in ("RD", "IF"):
        vals = res.tests_to_goal(m, 40.0)
        assert float(rows[(m, 40.0)]["mean_tests"]) == pytest.approx(sum(vals) / len(vals), abs=1e-6)


def test_single_run_table_equals_history(tmp_path):
    res = run_experiment(small(methods=("IF",), repeats=1), None, jobs=1)
    h = res.history("IF", 0)
    (row40, row45) = res.table()
    assert row40["mean_tests"] == h.tests_to_goal(40.0)
    assert row40["mean_tests_raw"] == h.tests_to_goal(40.0, interpolate=False)
    assert "saved_tests" not in row40


def test_not_reached_is_counted(tmp_path):
    res = run_experiment(small(methods=("RD",), repeats=1, goals=(99.99,)), tmp_path, jobs=1)
    (row,) = res.table()
    assert row["not_reached"] == 1 and "mean_tests" not in row
    assert "never reached" in (tmp_path / "summary.md").read_text()


def test_curves_round_trip_and_report(result):
    res, out = result
    hists = load_curves(out / "curves.csv")
    assert set(hists) == set(res.histories)
    rows = {r["method"]: r for r in goal_report(out / "curves.csv", 45.0)}
    for m in ("RD", "IF"):
        vals = [v for v in res.tests_to_goal(m, 45.0) if v is not None]
        assert rows[m]["reached"] == len(vals)


def test_paired_warmups(result):
    res, _ = result
    for s in (0, 1):
        assert res.history("RD", s).iterations[0].selected == res.history("IF", s).iterations[0].selected


def test_parallel_matches_serial(result, tmp_path):
    _, out = result
    run_experiment(small(), tmp_path, jobs=2)
    assert (tmp_path / "curves.csv").read_bytes() == (out / "curves.csv").read_bytes()
    assert (tmp_path / "table.csv").read_bytes() == (out / "table.csv").read_bytes()


def test_config_json_round_trip(result):
    res, out = result
    again = ExperimentConfig.from_dict(json.loads((out / "config.json").read_text()))
    assert again == res.config


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="config not found"):
        ExperimentConfig.load(tmp_path / "missing.json")
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=("RD", "GAN"))
    with pytest.raises(ConfigError):
        ExperimentConfig(repeats=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(goals=(95, 90))
    with pytest.raises(ConfigError):
        ExperimentConfig(repeats=2, seeds=(1,))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"reps": 3})
