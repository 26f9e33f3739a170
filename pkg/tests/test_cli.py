import csv
import json
import warnings

import numpy as np
import pytest
import yaml

from builders import make_series, write_csv
from hmdpose import cli
from hmdpose.config import RunConfig
from hmdpose.dataset import read_feature_csv
from hmdpose.experiments import extract_features, run_multilabel, run_screening
from hmdpose.errors import DegenerateDataset
from hmdpose.taxonomy import FEATURE_COLUMNS

QUICK = {"task": "multilabel", "labels": ["tremor", "myoclonus", "athetosis"], "k": 5, "inner_k": 3,
         "pooling": "p90", "grid": {"select_k": [20], "models": {"logreg": {"C": [1.0]}}},
         "threshold": {"alpha": 0.5, "constraints": {"max_control_fp": 0}}}


@pytest.fixture(scope="module")
def features_csv(small_cohort, tmp_path_factory):
    series = small_cohort[0]
    path = tmp_path_factory.mktemp("feat") / "features.csv"
    extract_features(series, path)
    return path


def _config(tmp_path, name="run.yaml", **overrides):
    data = {**QUICK, **overrides}
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def _main(argv):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return cli.main([str(a) for a in argv])


def test_config_round_trip_and_hash(tmp_path):
    cfg = RunConfig.from_dict(QUICK)
    cfg.save(tmp_path / "c.yaml")
    back = RunConfig.load(tmp_path / "c.yaml")
    assert back == cfg and back.hash() == cfg.hash()
    moved = RunConfig.from_dict({**QUICK, "output_dir": "elsewhere"})
    assert moved.hash() == cfg.hash()
    assert RunConfig.from_dict({**QUICK, "seed": 1}).hash() != cfg.hash()
    with pytest.raises(ValueError):
        RunConfig.from_dict({"tsk": "multilabel"})


def test_extract_writes_374_columns(tmp_path, small_cohort):
    pose = tmp_path / "pose"
    pose.mkdir()
    for s in small_cohort[0][:3]:
        write_csv(s, pose / f"{s.video_id}.csv")
    assert _main(["extract", "--pose-dir", pose, "--out", tmp_path / "f.csv"]) == cli.EXIT_OK
    header = (tmp_path / "f.csv").read_text(encoding="utf-8").splitlines()[0].split(",")
    assert header[-374:] == FEATURE_COLUMNS
    assert (tmp_path / "f.manifest.json").exists() and (tmp_path / "f.drops.json").exists()


def test_missing_column_exit_code(tmp_path, capsys):
    pose = tmp_path / "pose"
    pose.mkdir()
    write_csv(make_series(), pose / "a.csv")
    lines = (pose / "a.csv").read_text(encoding="utf-8").splitlines()
    header = lines[1].split(",")
    drop = header.index("left_knee_y")
    cut = [",".join(v for i, v in enumerate(l.split(",")) if i != drop) for l in lines[1:]]
    (pose / "a.csv").write_text("\n".join([lines[0]] + cut) + "\n", encoding="utf-8")
    assert _main(["extract", "--pose-dir", pose, "--out", tmp_path / "f.csv"]) == cli.EXIT_INPUT
    assert "left_knee_y" in capsys.readouterr().err


def test_multilabel_run_and_report(tmp_path, features_csv):
    cfg = _config(tmp_path)
    out = tmp_path / "out"
    rc = _main(["run", "--config", cfg, "--features", features_csv, "--output-dir", out, "--importance"])
    assert rc == cli.EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    assert "macro_auc" in metrics["summary"] and (out / "fold_plan.json").exists()
    assert metrics["config_hash"] == json.loads((out / "fold_plan.json").read_text())["config_hash"]
    assert _main(["report", out]) == cli.EXIT_OK
    with open(out / "report" / "confusion_bars.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["label"] for r in rows] == ["athetosis", "myoclonus", "tremor"]
    assert all(int(r["TP"]) + int(r["FN"]) + int(r["FP"]) + int(r["TN"]) == 25 for r in rows)
    with open(out / "report" / "family_shares.csv", encoding="utf-8") as fh:
        shares = list(csv.DictReader(fh))
    for r in shares:
        assert sum(float(v) for k, v in r.items() if k != "label") == pytest.approx(1.0)

    # importance task against the finished run's bundles
    imp = tmp_path / "imp"
    rc = _main(["run", "--config", cfg, "--task", "importance", "--features", features_csv,
                "--bundle-dir", out, "--output-dir", imp])
    assert rc == cli.EXIT_OK
    assert (imp / "importance.csv").read_bytes() == (out / "importance.csv").read_bytes()


def test_importance_without_bundles(tmp_path, features_csv, capsys):
    rc = _main(["run", "--config", _config(tmp_path), "--task", "importance", "--features", features_csv,
                "--output-dir", tmp_path / "o"])
    assert rc == cli.EXIT_INPUT and "bundle" in capsys.readouterr().err


def test_report_on_empty_dir(tmp_path):
    (tmp_path / "empty").mkdir()
    assert _main(["report", tmp_path / "empty"]) == cli.EXIT_INPUT
    assert _main(["report", tmp_path / "missing"]) == cli.EXIT_INPUT


def test_screening_without_controls(tmp_path, features_csv):
    records = [r for r in read_feature_csv(features_csv) if not r.is_control]
    cfg = RunConfig.from_dict({"task": "screening", "output_dir": str(tmp_path / "s")})
    with pytest.raises(DegenerateDataset):
        run_screening(cfg, records)


def test_screening_exit_code(tmp_path, features_csv):
    rc = _main(["run", "--task", "screening", "--features", features_csv, "--output-dir", tmp_path / "s",
                "--phenotype", "chorea"])
    assert rc == cli.EXIT_DEGENERATE


def test_screening_run(tmp_path, features_csv):
    rc = _main(["run", "--task", "screening", "--features", features_csv, "--output-dir", tmp_path / "s",
                "--phenotype", "tremor", "--no-bundles"])
    assert rc == cli.EXIT_OK
    m = json.loads((tmp_path / "s" / "metrics.json").read_text(encoding="utf-8"))
    assert m["subject"]["roc_auc"]["mean"] > 0.8


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("task: dance\n", encoding="utf-8")
    assert _main(["run", "--config", bad]) == cli.EXIT_INPUT
    assert _main(["run", "--config", tmp_path / "nope.yaml"]) == cli.EXIT_INPUT


def test_synth_command(tmp_path):
    rc = _main(["synth", "--out", tmp_path / "syn", "--n-patients", 3, "--n-controls", 1, "--windows", 3])
    assert rc == cli.EXIT_OK
    assert len(list((tmp_path / "syn" / "pose").glob("*.csv"))) == 4
    assert len(read_feature_csv(tmp_path / "syn" / "features.csv")) == 12


def test_regression_baseline(tmp_path, small_cohort):
    """Frozen numbers for the quick configuration on the 12-window cohort."""
    cfg = RunConfig.from_dict({**QUICK, "output_dir": str(tmp_path / "r"), "save_bundles": False})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_multilabel(cfg, small_cohort[2])
    m = res["metrics"]
    got = (m["pooled"]["macro_auc"], m["pooled"]["hamming_acc"], m["pooled"]["exact_match"],
           m["control_false_positives"])
    assert got == pytest.approx(BASELINE, abs=1e-12)


BASELINE = (1.0, 0.9866666666666667, 0.96, 0)
