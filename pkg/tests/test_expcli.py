import csv
import json

import numpy as np
import pytest

from rmtlab import expcli
from rmtlab.expcli import ConfigError, ExperimentConfig, main, run_experiment, task_seed


def _write(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


def test_config_round_trip():
    cfg = ExperimentConfig("localLaw", {"eta": "0.5", "Ns": [100, 200]}, masterSeed=3, workers=2)
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.resolved()["eta"] == 0.5


def test_decimal_strings_are_exact():
    P = ExperimentConfig("girko", {"epsilon": "0.3", "N": "120"}).resolved()
    assert P["epsilon"] == 0.3 and P["N"] == 120 and isinstance(P["N"], int)


@pytest.mark.parametrize("raw", [
    {"kind": "localLaw", "bogus": 1},
    {"kind": "localLaw", "parameters": {"etaa": 0.5}},
    {"kind": "nope"},
    {"kind": "identities", "parameters": {"checks": ["jacobian", "magic"]}},
    {"kind": "localLaw", "parameters": {"eta": "abc"}},
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw).resolved()


def test_task_seeds_are_stable():
    assert task_seed(1, 0) == task_seed(1, 0)
    assert len({task_seed(1, i) for i in range(100)}) == 100
    assert task_seed(1, 0) != task_seed(2, 0)


def test_validation_error_writes_nothing(tmp_path):
    cfg = _write(tmp_path / "c.json", {"kind": "localLaw", "parameters": {"zzz": 1}})
    out = tmp_path / "out"
    assert main(["localLaw", "--config", str(cfg), "--out", str(out)]) != 0
    assert not out.exists()


def test_eta_below_scale_is_rejected(tmp_path):
    cfg = _write(tmp_path / "c.json", {"kind": "localLaw", "parameters": {"eta": 0.001}})
    out = tmp_path / "out"
    assert main(["localLaw", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()


def test_sample_run_artifacts(tmp_path):
    cfg = _write(tmp_path / "c.json", {"kind": "sample", "parameters": {"N": 3, "count": 2}})
    assert main(["sample", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "sample" / "result.json").read_text(encoding="utf-8"))
    assert res["allPass"] and res["config"]["masterSeed"] == 4
    assert res["taskSeeds"] == [task_seed(4, 0), task_seed(4, 1)]
    with open(tmp_path / "sample" / "entries.csv", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sample", "row", "col", "value"] and len(rows) == 19
    assert all("," not in r[3] for r in rows[1:])
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def test_results_do_not_depend_on_workers(tmp_path):
    params = {"Ns": [60, 120], "samples": 4, "eta": 0.8}
    r1 = run_experiment(ExperimentConfig("localLaw", params, 5, 1, str(tmp_path / "a")))
    r2 = run_experiment(ExperimentConfig("localLaw", params, 5, 2, str(tmp_path / "b")))
    e1 = (tmp_path / "a" / "localLaw" / "errors.csv").read_text(encoding="utf-8")
    e2 = (tmp_path / "b" / "localLaw" / "errors.csv").read_text(encoding="utf-8")
    assert e1 == e2 and r1.summary["slope"] == r2.summary["slope"]


def test_exit_code_tracks_flags(tmp_path, monkeypatch):
    cfg = _write(tmp_path / "c.json", {"kind": "mde", "parameters": {"points": 2}})
    assert main(["mde", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    bad = _write(tmp_path / "d.json", {"kind": "mde", "parameters": {"points": 2,
                                                                    "residualTolerance": 0}})
    assert main(["mde", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_kind_mismatch(tmp_path):
    cfg = _write(tmp_path / "c.json", {"kind": "mde"})
    assert main(["girko", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
