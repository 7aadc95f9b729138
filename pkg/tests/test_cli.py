import json

import numpy as np
import pytest

from wdi_outbreak.cli import build_parser, main
from wdi_outbreak.data import load_panel_csv
from wdi_outbreak.imputation import DistanceSpec, knn_impute


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--countries", "24", "--years", "5", "--features", "6",
                 "--informative", "0,1", "--seed", "3"]) == 0
    return out


def test_synth_outputs(synth_dir):
    assert {p.name for p in synth_dir.iterdir()} == {"panel.csv", "labels.csv", "truth.json"}
    truth = json.loads((synth_dir / "truth.json").read_text())
    assert truth["informative"] == [0, 1] and truth["seed"] == 3


def test_impute_matches_library(synth_dir, tmp_path):
    out = tmp_path / "imp.csv"
    assert main(["impute", "--train", str(synth_dir / "panel.csv"), "--method", "knn", "--k", "5", "--out", str(out)]) == 0
    t = load_panel_csv(synth_dir / "panel.csv")
    np.testing.assert_array_equal(load_panel_csv(out).values, knn_impute(t, t, DistanceSpec(5)).values)


def test_stage_chain(synth_dir, tmp_path):
    p, l = str(synth_dir / "panel.csv"), str(synth_dir / "labels.csv")
    d = tmp_path
    assert main(["ingest", "--panel", p, "--labels", l, "--out", str(d / "ing")]) == 0
    ing = d / "ing"
    assert main(["impute", "--train", str(ing / "train_panel.csv"), "--method", "msreg", "--out", str(d / "tr.csv"),
                 "--model-out", str(d / "imp.json")]) == 0
    assert main(["impute", "--train", str(ing / "train_panel.csv"), "--target", str(ing / "test_panel.csv"),
                 "--model", str(d / "imp.json"), "--out", str(d / "te.csv")]) == 0
    assert main(["scale", "--train", str(d / "tr.csv"), "--method", "logdev", "--quantile-range", "0.1,0.9",
                 "--out", str(d / "trs.csv"), "--params-out", str(d / "sc.json")]) == 0
    assert main(["scale", "--train", str(d / "tr.csv"), "--target", str(d / "te.csv"), "--params", str(d / "sc.json"),
                 "--out", str(d / "tes.csv")]) == 0
    assert main(["resample", "--panel", str(d / "trs.csv"), "--labels", str(ing / "train_labels.csv"),
                 "--out-panel", str(d / "rp.csv"), "--out-labels", str(d / "rl.csv"), "--smote-k", "3"]) == 0
    assert main(["train", "--panel", str(d / "rp.csv"), "--labels", str(d / "rl.csv"),
                 "--classifier", "forest:n_trees=7", "--model-out", str(d / "m.json")]) == 0
    assert main(["evaluate", "--model", str(d / "m.json"), "--panel", str(d / "tes.csv"),
                 "--labels", str(ing / "test_labels.csv"), "--out", str(d / "metrics.json")]) == 0
    assert 0 <= json.loads((d / "metrics.json").read_text())["accuracy"] <= 1
    assert main(["importance", "--model", str(d / "m.json"), "--out-csv", str(d / "imp.csv"),
                 "--out-svg", str(d / "imp.svg"), "--top-k", "3"]) == 0
    assert (d / "imp.csv").read_text().startswith("rank,feature,importance\n")


def test_benchmark_six_rows(synth_dir, tmp_path):
    assert main(["benchmark", "--panel", str(synth_dir / "panel.csv"), "--labels", str(synth_dir / "labels.csv"),
                 "--out", str(tmp_path), "--classifiers", "cart", "gnb"]) == 0
    lines = (tmp_path / "results.csv").read_text().strip().splitlines()
    assert len(lines) == 7


def test_pipeline_echoes_seed(synth_dir, tmp_path):
    assert main(["pipeline", "--panel", str(synth_dir / "panel.csv"), "--labels", str(synth_dir / "labels.csv"),
                 "--out", str(tmp_path), "--seed", "7", "--classifier", "forest:n_trees=5"]) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 7


def test_pipeline_config_file_with_override(synth_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"panel": str(synth_dir / "panel.csv"), "labels": str(synth_dir / "labels.csv"),
                               "imputer": "random", "classifier": "cart", "seed": 1}))
    assert main(["pipeline", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["seed"] == 4 and man["config"]["imputer"] == "random"


def test_usage_errors_exit_2(capsys):
    for argv in (["pipeline", "--bogus"], ["impute", "--method", "mice", "--train", "x", "--out", "y"], ["nosuch"],
                 ["scale", "--train", "a", "--out", "b", "--quantile-range", "0.9,0.1"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert main(["impute", "--train", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o.csv")]) == 1
    assert main(["pipeline", "--panel", str(tmp_path / "missing.csv"), "--labels", "x", "--out", str(tmp_path / "p")]) == 1
    man = json.loads((tmp_path / "p" / "manifest.json").read_text())
    assert man["status"] == "error" and man["error"]["stage"] == "ingest"


def test_every_flag_has_help():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    parsers = [parser, *sub.choices.values()]
    for p in parsers:
        for action in p._actions:
            if action.dest in ("help", "command"):
                continue
            assert action.help, f"{p.prog}: {action.option_strings} lacks help"
    assert set(sub.choices) == {"ingest", "impute", "scale", "resample", "train", "evaluate", "importance",
                                "benchmark", "synth", "pipeline"}
