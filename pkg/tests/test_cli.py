import csv
import json
from pathlib import Path

import jsonschema
import pytest

from rfegb.cli import ALGORITHMS, content_hash, main
from rfegb.config import ConfigError, RunConfig

from synth import HEADER, write_cvd_like

SCHEMA = json.loads((Path(__file__).parent.parent / "docs" / "report_schema.json").read_text())
FAST = ["--set", "gbm.n_stages=15", "--set", "rfe.folds=3", "--set", "rfe.counts=1,2,4,11"]


@pytest.fixture(scope="module")
def cvd_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "cvd.csv"
    write_cvd_like(path, 600, seed=1)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_prep_summary_and_output(cvd_file, tmp_path, capsys):
    target = tmp_path / "clean.csv"
    code, out, _ = run(capsys, "prep", "--input", cvd_file, "--output", target)
    assert code == 0
    assert "rows: 600" in out and "imputed: 0" in out
    header = target.read_text().splitlines()[0]
    assert header == ",".join(HEADER[1:])
    # the cleaned file loads again with age already in years
    code, out, _ = run(capsys, "prep", "--input", target, "--delimiter", ",", "--output", tmp_path / "again.csv")
    assert code == 0
    assert (tmp_path / "again.csv").read_text() == target.read_text()


def test_prep_empty_file(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, _, err = run(capsys, "prep", "--input", empty, "--output", tmp_path / "o.csv")
    assert code == 2
    assert "empty dataset" in err
    assert len(err.strip().splitlines()) == 1


def test_prep_counts_imputed_cells(cvd_file, tmp_path, capsys):
    lines = cvd_file.read_text().splitlines()
    for i, col in ((3, 3), (10, 5), (20, 11)):
        cells = lines[i].split(";")
        cells[col] = "NA" if col == 5 else ""
        lines[i] = ";".join(cells)
    holey = tmp_path / "holes.csv"
    holey.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "prep", "--input", holey, "--output", tmp_path / "o.csv")
    assert code == 0
    assert "imputed: 3" in out.splitlines()


def test_prep_names_the_bad_line(cvd_file, tmp_path, capsys):
    lines = cvd_file.read_text().splitlines()
    lines[7] = lines[7] + ";9"
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "prep", "--input", bad, "--output", tmp_path / "o.csv")
    assert code == 2
    assert "line 8" in err


def test_train_writes_deterministic_model(cvd_file, tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        code, out, _ = run(capsys, "train", "--input", cvd_file, "--output-dir", tmp_path / name)
        assert code == 0
        outs.append((tmp_path / name / "model.json").read_bytes())
    assert "stages: 100" in out
    assert outs[0] == outs[1]
    assert len(json.loads(outs[0])["stages"]) == 100


def test_train_with_selected_features(cvd_file, tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--input", cvd_file, "--output-dir", tmp_path,
                       "--set", "train.select_features=true", *FAST)
    assert code == 0
    model = json.loads((tmp_path / "model.json").read_text())
    assert 1 <= len(model["feature_names"]) <= 11


def test_train_rejects_zero_learning_rate(cvd_file, tmp_path, capsys):
    code, _, err = run(capsys, "train", "--input", cvd_file, "--output-dir", tmp_path,
                       "--set", "gbm.learning_rate=0")
    assert code == 2
    assert "learning_rate out of range" in err


def test_train_single_class_is_a_runtime_failure(cvd_file, tmp_path, capsys):
    lines = cvd_file.read_text().splitlines()
    ones = [lines[0]] + [";".join(l.split(";")[:-1] + ["1"]) for l in lines[1:]]
    path = tmp_path / "ones.csv"
    path.write_text("\n".join(ones) + "\n")
    code, _, err = run(capsys, "train", "--input", path, "--output-dir", tmp_path)
    assert code == 3
    assert "error:" in err


def test_rfe_single_count_selects_everything(cvd_file, tmp_path, capsys):
    code, out, _ = run(capsys, "rfe", "--input", cvd_file, "--output-dir", tmp_path,
                       "--set", "rfe.counts=11", "--set", "rfe.folds=3", "--set", "gbm.n_stages=10")
    assert code == 0
    doc = json.loads((tmp_path / "rfe.json").read_text())
    assert doc["selected_count"] == 11 and len(doc["selected_features"]) == 11
    rows = list(csv.reader((tmp_path / "rfe_curve.csv").open()))
    assert rows == [["feature_count", "cv_score"], ["11", rows[1][1]]]


def test_unknown_criterion_is_a_usage_error(cvd_file, tmp_path, capsys):
    code, _, err = run(capsys, "rfe", "--input", cvd_file, "--output-dir", tmp_path,
                       "--set", "rfe.criterion=chi2")
    assert code == 2
    assert "rfe.criterion" in err


def test_config_file_and_unknown_keys(cvd_file, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# quick run\ndata.input = {cvd_file}\ngbm.n_stages = 3  # tiny\n")
    code, out, _ = run(capsys, "train", "--config", cfg, "--output-dir", tmp_path)
    assert code == 0 and "stages: 3" in out
    cfg.write_text("gbm.depth = 3\n")
    code, _, err = run(capsys, "train", "--config", cfg)
    assert code == 2 and "unknown config key" in err
    code, _, err = run(capsys, "train", "--config", tmp_path / "missing.cfg")
    assert code == 2


def test_missing_command_exits_with_usage_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_run_config_parsing():
    cfg = RunConfig()
    cfg.apply_lines(["rfe.counts = 1-3, 7", "split.stratify = no", "data.delimiter = comma"])
    assert cfg["rfe.counts"] == [1, 2, 3, 7]
    assert cfg["split.stratify"] is False and cfg["data.delimiter"] == ","
    with pytest.raises(ConfigError):
        cfg.set("knn.k", "five")
    with pytest.raises(ConfigError):
        RunConfig({"knn.k": 0}).validate()
    assert "seed = 42" in RunConfig().echo().splitlines()


@pytest.fixture(scope="module")
def compare_run(cvd_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("compare")
    code = main(["compare", "--input", str(cvd_file), "--output-dir", str(out), *FAST])
    return code, out


def test_compare_outputs(compare_run):
    code, out = compare_run
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, SCHEMA)
    assert [r["algorithm"] for r in report["results"]] == list(ALGORITHMS)
    assert report["content_hash"] == content_hash(report)
    for name in ALGORITHMS:
        rows = (out / f"roc_{name}.csv").read_text().splitlines()
        assert rows[0] == "threshold,fpr,tpr"
        assert rows[1].startswith("inf,") and rows[-1].startswith("-inf,")
    curve = list(csv.reader((out / "rfe_curve.csv").open()))
    assert [r[0] for r in curve[1:]] == ["1", "2", "4", "11"]
    table = (out / "table.txt").read_text().splitlines()
    order = [line.split()[0] for line in table[2:7]]
    assert order == list(ALGORITHMS)
    gb = report["results"][-1]
    assert sorted(gb["features"]) == sorted(report["rfe"]["selected_features"])
    assert all(len(r["features"]) == 11 for r in report["results"][:4])


def test_compare_baselines_can_use_selection(cvd_file, tmp_path, capsys):
    code, _, _ = run(capsys, "compare", "--input", cvd_file, "--output-dir", tmp_path,
                     "--baselines-use-selected", *FAST)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["baselines_use_selected"] is True
    selected = sorted(report["rfe"]["selected_features"])
    assert all(sorted(r["features"]) == selected for r in report["results"])


def _separable_csv(path, n=400):
    import numpy as np

    rng = np.random.default_rng(0)
    y = np.arange(n) % 2
    rows = []
    for i, label in enumerate(y):
        hi = rng.integers(165, 200) if label else rng.integers(100, 125)
        lo = rng.integers(100, 120) if label else rng.integers(60, 80)
        chol = 3 if label else 1
        rows.append([i, rng.integers(11000, 23000), rng.integers(1, 3), rng.integers(150, 190),
                     rng.integers(50, 110), hi, lo, chol, rng.integers(1, 4), rng.integers(0, 2),
                     rng.integers(0, 2), rng.integers(0, 2), label])
    with open(path, "w") as fh:
        fh.write(";".join(HEADER) + "\n")
        for r in rows:
            fh.write(";".join(str(int(v)) for v in r) + "\n")


def test_compare_on_separable_data(tmp_path, capsys):
    data = tmp_path / "sep.csv"
    _separable_csv(data)
    code, _, _ = run(capsys, "compare", "--input", data, "--output-dir", tmp_path / "out", *FAST)
    assert code == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    for r in report["results"]:
        assert r["accuracy"] >= 0.95, r["algorithm"]
        assert r["auc"] >= 0.99, r["algorithm"]
