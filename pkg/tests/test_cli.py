import csv
import json
import re
import subprocess
import sys

import pytest

from covsteer.cli import main
from covsteer.stimgen import load_corpus

EXP = {"methods": ["RD", "IF"], "repeats": 2, "corpus": {"seed": 3, "n_tests": 100, "len_range": [20, 40]},
       "loop": {"warmup_n": 20, "batch": 20, "hyper": {"trees": 20, "subsample": 64}}, "goals": [40, 45]}


@pytest.fixture
def exp_config(tmp_path):
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(EXP))
    return p


def test_gen(tmp_path, capsys):
    out = tmp_path / "c.jsonl"
    assert main(["gen", "--seed", "1", "--n", "10", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 10


def test_gen_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("COVSTEER_SEED", "5")
    main(["gen", "--n", "3", "--out", str(tmp_path / "a.jsonl")])
    main(["gen", "--n", "3", "--seed", "5", "--out", str(tmp_path / "b.jsonl")])
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_missing_config(tmp_path, capsys):
    assert main(["exp", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert "config not found" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["gen", "--n", "3", "--out", "x", "--bogus"], ["frobnicate"], [],
                                  ["gen", "--out", "x"], ["report", "--runs", "r", "--goal", "high"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_distinct_error_messages(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["exp", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "not valid JSON" in capsys.readouterr().err
    bad.write_text('{"repeats": 0}')
    assert main(["exp", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "repeats" in capsys.readouterr().err
    assert main(["sim", "--corpus", str(tmp_path / "none.jsonl")]) == 1
    assert "corpus not found" in capsys.readouterr().err


def test_help_documents_flags(capsys):
    assert main(["exp", "--help"]) == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--out", "--jobs", "--methods", "--repeats", "--seed"):
        assert flag in text


def test_sim(tmp_path, capsys):
    c = tmp_path / "c.jsonl"
    main(["gen", "--seed", "2", "--n", "5", "--out", str(c)])
    capsys.readouterr()
    assert main(["sim", "--corpus", str(c), "--ids", "0,3", "--out", str(tmp_path / "ev.jsonl")]) == 0
    assert "tests simulated: 2" in capsys.readouterr().out
    lines = (tmp_path / "ev.jsonl").read_text().splitlines()
    assert [json.loads(x)["test_id"] for x in lines] == [0, 3]


def test_select(tmp_path, capsys):
    c = tmp_path / "c.jsonl"
    main(["gen", "--seed", "2", "--n", "60", "--min-len", "10", "--max-len", "20", "--out", str(c)])
    out = tmp_path / "sel"
    assert main(["select", "--corpus", str(c), "--method", "AE", "--warmup", "10", "--batch", "25",
                 "--epochs", "1", "--goals", "99", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert len(re.findall(r"^AE seed=0 iter=\d+", text, re.M)) == 3
    assert (out / "history.jsonl").is_file()
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["loop"]["batch"] == 25 and echoed["loop"]["hyper"]["epochs"] == 1


def _interp_from_csv(path, goal):
    """Independent recomputation of tests-to-goal from curves.csv."""
    runs = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            runs.setdefault((r["method"], r["seed"]), []).append((int(r["tests"]), float(r["coverage"])))
    per_method = {}
    for (m, _), pts in runs.items():
        val = None
        for k, (t, c) in enumerate(pts):
            if c >= goal:
                if k == 0:
                    val = t
                else:
                    t0, c0 = pts[k - 1]
                    val = t0 + (t - t0) * (goal - c0) / (c - c0)
                break
        per_method.setdefault(m, []).append(val)
    return per_method


def test_exp_then_report(tmp_path, exp_config, capsys):
    out = tmp_path / "res"
    assert main(["exp", "--config", str(exp_config), "--out", str(out), "--jobs", "1"]) == 0
    text = capsys.readouterr().out
    assert re.search(r"^IF seed=1 iter=\d+ tests=\d+ coverage=", text, re.M)
    assert main(["report", "--runs", str(out), "--goal", "45"]) == 0
    report = capsys.readouterr().out
    for m, vals in _interp_from_csv(out / "curves.csv", 45.0).items():
        reached = [v for v in vals if v is not None]
        if reached:
            assert f"{m}: mean {sum(reached) / len(reached):.1f}" in report
        else:
            assert f"{m}: not reached" in report


def test_config_echo_reruns_identically(tmp_path, exp_config, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["exp", "--config", str(exp_config), "--out", str(a), "--jobs", "1", "--quiet",
                 "--methods", "RD"]) == 0
    assert main(["exp", "--config", str(a / "config.json"), "--out", str(b), "--jobs", "1", "--quiet"]) == 0
    assert (a / "curves.csv").read_bytes() == (b / "curves.csv").read_bytes()
    assert (a / "config.json").read_bytes() == (b / "config.json").read_bytes()


def test_env_seed_overrides_exp_config(tmp_path, exp_config, monkeypatch):
    monkeypatch.setenv("COVSTEER_SEED", "9")
    assert main(["exp", "--config", str(exp_config), "--out", str(tmp_path), "--jobs", "1", "--quiet",
                 "--methods", "RD"]) == 0
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 9
    assert {row["seed"] for row in csv.DictReader((tmp_path / "curves.csv").open())} == {"9", "10"}


def test_module_entry_point(tmp_path):
    out = tmp_path / "c.jsonl"
    proc = subprocess.run([sys.executable, "-m", "covsteer", "gen", "--n", "2", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert len(load_corpus(out)) == 2
