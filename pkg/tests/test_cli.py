import csv
import json

import pytest

import geoconform.cli as cli
from geoconform.cli import EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, exit_code_for, main
from geoconform.datamodel import save_csv
from geoconform.errors import ConfigError, ContractError, DataError, StageError
from geoconform.report import load_schema, strip_volatile, validate_report

from conftest import make_dataset

SMALL = {
    "synth": {"n_locations": 4, "records_per_location": 30, "seed": 1},
    "run": {"models": [{"kind": "seasonal_naive"}, {"kind": "ridge", "alpha": 1.0},
                       {"kind": "gbt", "n_estimators": 10, "max_depth": 3,
                        "min_samples_leaf": 5}],
            "folds": 4},
}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_exit_code_mapping():
    assert exit_code_for(ConfigError("x")) == EXIT_CONFIG
    assert exit_code_for(DataError("x")) == EXIT_DATA
    assert exit_code_for(ContractError("x")) == EXIT_DATA
    assert exit_code_for(FileNotFoundError("x")) == EXIT_DATA
    assert exit_code_for(StageError("cv", ConfigError("x"))) == EXIT_CONFIG
    assert exit_code_for(RuntimeError("x")) == EXIT_INTERNAL


def test_synth_deterministic(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", SMALL)
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a.csv")]) == EXIT_OK
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b.csv")]) == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert "600 rows from 20 locations" in capsys.readouterr().out


def test_synth_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err
    wrong = write_json(tmp_path / "w.json", {"synth": {"n_locations": -1}})
    assert main(["synth", "--config", str(wrong), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert not (tmp_path / "x.csv").exists()


def test_run_outputs_and_determinism(tmp_path):
    cfg = write_json(tmp_path / "c.json", SMALL)
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / name)]) == EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    expected = {"report.json", "cv_metrics.csv", "conformal_coverage.csv", "shift.csv",
                "flags.csv", "ranking.csv", "intervals.csv", "scatter.svg",
                "picp_by_region.svg", "flags_by_region.svg"}
    assert {p.name for p in a.iterdir()} == expected
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    validate_report(ra)
    assert strip_volatile(ra) == strip_volatile(rb)
    for name in expected - {"report.json"}:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert [m["model"] for m in ra["cv"]["models"]] == ["seasonal_naive", "ridge", "gbt"]


def test_run_seed_flag_changes_report(tmp_path):
    cfg = write_json(tmp_path / "c.json", SMALL)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "7"])
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rb["seeds"]["run"] == 7 and rb["config"]["synth"]["seed"] == 7
    assert ra["cv"] != rb["cv"]


def test_run_from_csv_with_flags(tmp_path):
    cfg = write_json(tmp_path / "c.json", SMALL)
    main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d.csv")])
    run_only = write_json(tmp_path / "r.json", {"run": SMALL["run"]})
    code = main(["run", "--data", str(tmp_path / "d.csv"), "--config", str(run_only),
                 "--out", str(tmp_path / "o"), "--cv", "random", "--conformal-mode",
                 "per-region", "--alpha", "0.2", "--folds", "3"])
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["cv"]["kind"] == "random" and rep["cv"]["k"] == 3
    assert rep["conformal"]["mode"] == "per-region" and rep["conformal"]["alpha"] == 0.2
    assert rep["data"]["audit"]["accepted"] == 600


def test_run_too_few_locations(tmp_path, capsys):
    save_csv(make_dataset([10]), tmp_path / "ten.csv")
    code = main(["run", "--data", str(tmp_path / "ten.csv"), "--out", str(tmp_path / "o")])
    assert code == EXIT_DATA
    assert "fewer locations than folds" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_run_errors(tmp_path):
    assert main(["run", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == EXIT_DATA
    assert main(["run", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    cfg = write_json(tmp_path / "c.json", {"run": {"fold": 5}})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    cfg = write_json(tmp_path / "c.json", {"synth": SMALL["synth"], "run": {"alpha": 1.5}})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_partial_outputs_removed(tmp_path, monkeypatch):
    cfg = write_json(tmp_path / "c.json", SMALL)

    def boom(*a, **k):
        raise RuntimeError("render failed")

    monkeypatch.setattr(cli, "figure_flags", boom)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INTERNAL
    assert not (tmp_path / "o").exists()
    assert not any(p.name.startswith(".") for p in tmp_path.iterdir())


def test_shift_train_equals_test(tmp_path):
    save_csv(make_dataset([8, 8, 8]), tmp_path / "d.csv")
    out = tmp_path / "s.csv"
    assert main(["shift", "--train", str(tmp_path / "d.csv"), "--test", str(tmp_path / "d.csv"),
                 "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 10 and {r["severity"] for r in rows} == {"Low"}


def test_shift_region_json(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"synth": {**SMALL["synth"],
                                                     "shift": {"east": {"humidity": 2.0}}}})
    main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d.csv")])
    out = tmp_path / "s.json"
    assert main(["shift", "--data", str(tmp_path / "d.csv"), "--region", "east",
                 "--features", "humidity,sat_aot", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert [f["feature"] for f in doc["features"]] == ["humidity", "sat_aot"]
    assert main(["shift", "--data", str(tmp_path / "d.csv"), "--region", "mars"]) == EXIT_CONFIG
    assert main(["shift", "--train", str(tmp_path / "d.csv")]) == EXIT_CONFIG


def test_flags_table_shaped(tmp_path):
    src = tmp_path / "regions.csv"
    src.write_text("region,r2,mpiw\nnorth,0.241,38.2\neast,-0.083,72.6\n")
    out = tmp_path / "f.csv"
    assert main(["flags", "--data", str(src), "--out", str(out)]) == EXIT_OK
    assert [(r["region"], r["flag"]) for r in read_csv(out)] == [("north", "High"), ("east", "Low")]
    bad = tmp_path / "bad.csv"
    bad.write_text("region,r2\nnorth,0.2\n")
    assert main(["flags", "--data", str(bad)]) == EXIT_DATA


def test_prioritize_three_sites(tmp_path, capsys):
    src = tmp_path / "sites.csv"
    src.write_text("site_id,half_width,pop_density\nA,10,100\nB,20,100\nC,20,10\n")
    assert main(["prioritize", "--data", str(src)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "rank,site_id,half_width,pop_density,score"
    assert [l.split(",")[1] for l in lines[1:]] == ["B", "C", "A"]
    scores = [float(l.split(",")[4]) for l in lines[1:]]
    assert scores == sorted(scores, reverse=True)
    neg = tmp_path / "neg.csv"
    neg.write_text("site_id,half_width,pop_density\nA,-1,100\n")
    assert main(["prioritize", "--data", str(neg)]) == EXIT_DATA


def test_schema_is_valid_document():
    schema = load_schema()
    assert schema["type"] == "object" and "schema_version" in schema["required"]


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["dance"])
