import csv
import json

import pytest

from gradratio.cli import main, results_csv
from gradratio.experiments import (
    ExperimentConfig,
    ExperimentResult,
    parse_config_text,
    run_experiment,
)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def strip_timing(path):
    rows = read_rows(path)
    for r in rows:
        r.pop("seconds", None)
    return rows


SMALL_ONEBAR = ["--set", "s_min=19", "--set", "s_max=20", "--set", "restarts=2"]


def test_onebar_cli_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["onebar", *SMALL_ONEBAR, "--out", str(out)]) == 0
    with open(out / "results.csv") as fh:
        assert fh.readline().strip() == "method,s,re,psnr,exact_recovery,iters,seconds"
    rows = read_rows(out / "results.csv")
    assert [(r["method"], r["s"]) for r in rows] == [("tv", "19"), ("tv", "20"),
                                                     ("l1l2", "19"), ("l1l2", "20")]
    assert all(r["exact_recovery"] == "true" for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kind"] == "onebar" and manifest["version"]
    assert sorted(p.name for p in out.iterdir()) == manifest["files"]
    trace = json.loads((out / "trace_l1l2_s20.json").read_text())
    assert trace["re_trace"][-1] < 1e-6
    assert trace["params"]["rho"] == 8.0


def test_replay_from_manifest_is_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["onebar", *SMALL_ONEBAR, "--seed", "3", "--out", str(first)]) == 0
    assert main(["onebar", "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
    assert strip_timing(first / "results.csv") == strip_timing(second / "results.csv")


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# one-bar check\nmethods = tv\ns_min = 20\ns_max = 21  # two values\n"
                   "tv.k_max = 4000\n")
    out = tmp_path / "o"
    assert main(["onebar", "--config", str(cfg), "--set", "s_max=20", "--out", str(out)]) == 0
    rows = read_rows(out / "results.csv")
    assert [r["s"] for r in rows] == ["20"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["values"]["tv.k_max"] == 4000


@pytest.mark.parametrize("args", [
    ["onebar", "--set", "nonsense=1"],
    ["onebar", "--set", "rho=-1"],
    ["onebar", "--set", "methods=magic"],
    ["onebar", "--set", "s_min=60", "--set", "s_max=60"],
    ["ct", "--set", "methods=zf", "--set", "size=32"],
])
def test_errors_exit_nonzero_without_output(tmp_path, args, capsys):
    out = tmp_path / "bad"
    assert main([*args, "--out", str(out)]) != 0
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []
    assert "error" in capsys.readouterr().err


def test_manifest_kind_mismatch(tmp_path):
    out = tmp_path / "a"
    assert main(["onebar", *SMALL_ONEBAR, "--out", str(out)]) == 0
    assert main(["twobar", "--config", str(out / "manifest.json"), "--out",
                 str(tmp_path / "b")]) != 0


def test_workers_env_gives_same_table(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["twobar", "--set", "t_min=1.3", "--set", "t_max=1.4", "--set", "restarts=1",
            "--set", "k_max=50", "--set", "tv.k_max=50"]
    monkeypatch.setenv("GRADRATIO_WORKERS", "1")
    assert main([*args, "--out", str(a)]) == 0
    monkeypatch.setenv("GRADRATIO_WORKERS", "2")
    assert main([*args, "--out", str(b)]) == 0
    assert strip_timing(a / "results.csv") == strip_timing(b / "results.csv")
    monkeypatch.setenv("GRADRATIO_WORKERS", "zero")
    assert main([*args, "--out", str(tmp_path / "c")]) != 0


def test_parse_config_text():
    assert parse_config_text("a = 1\n\n# c\nb=x,y # tail\n") == {"a": "1", "b": "x,y"}
    with pytest.raises(ValueError):
        parse_config_text("novalue\n")


def test_config_values_and_method_overrides():
    cfg = ExperimentConfig("onebar", {"box": "none", "tv.rho": "3", "lines": "1"})
    assert cfg.params_for("l1l2").box is None
    assert cfg.params_for("tv").rho == 3.0
    assert cfg.params_for("l1l2").rho == 8.0
    with pytest.raises(ValueError):
        ExperimentConfig("onebar", {"tv.methods": "tv"})
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    ct = ExperimentConfig("sensitivity", {"app": "ct"})
    assert ct["lams"] == [0.005, 0.05, 0.5]
    assert ct.params_for("l1l2").j_max == 1


def test_small_image_experiments_run():
    mri = run_experiment(ExperimentConfig("mri", {"size": "32", "lines": "6,10", "k_max": "5"}))
    assert [r["lines"] for r in mri.rows] == [6] * 5 + [10] * 5
    zf = [r for r in mri.rows if r["method"] == "zf"]
    assert zf[0]["iters"] == 0
    ct = run_experiment(ExperimentConfig("ct", {"size": "32", "theta": "60", "n_detectors": "46",
                                                "k_max": "3", "sart_iters": "3"}))
    assert [r["method"] for r in ct.rows] == ["sart", "tv", "lp", "l1ml2", "l1l2"]
    sr = run_experiment(ExperimentConfig("superres", {"size": "32", "ratio": "0.2", "k_max": "3",
                                                      "methods": "zf,l1l2"}))
    assert 0 < sr.rows[0]["sampling"] <= 0.2
    ab = run_experiment(ExperimentConfig("ablation", {"size": "32", "k_max": "4",
                                                      "j_maxes": "1,2"}))
    assert [(r["study"], r["box"], r["j_max"]) for r in ab.rows] == [
        ("box", "0:1", 5), ("box", "none", 5), ("jmax", "0:1", 1), ("jmax", "0:1", 2)]
    assert all(r["re_min"] <= r["re"] for r in ab.rows)
    sens = run_experiment(ExperimentConfig("sensitivity", {"size": "32", "k_maxes": "2",
                                                           "lams": "1000", "exp_min": "-1",
                                                           "exp_max": "0"}))
    assert [(r["rho"], r["beta"]) for r in sens.rows] == [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5),
                                                          (1.0, 1.0)]


def test_results_csv_formatting():
    res = ExperimentResult(["method", "re", "psnr", "exact_recovery"],
                           [dict(method="tv", re=0.1, psnr=float("inf"), exact_recovery=False)],
                           {})
    assert results_csv(res) == "method,re,psnr,exact_recovery\ntv,0.1,inf,false\n"
