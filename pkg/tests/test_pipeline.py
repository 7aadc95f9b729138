import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from wdi_outbreak.pipeline import OUTPUT_FILES, PipelineConfig, PipelineError, run_pipeline

GOLDEN = Path(__file__).parent / "golden"
MANIFEST_KEYS = {"config", "files", "importance_data", "importance_model", "labels", "missing_overall", "seed",
                 "status", "train_class_counts", "versions"}


def _cfg(out, **kw):
    base = dict(panel=str(GOLDEN / "input_panel.csv"), labels=str(GOLDEN / "input_labels.csv"), out_dir=str(out),
                classifier="forest:n_trees=5", top_k=4)
    base.update(kw)
    return PipelineConfig(**base)


def test_bundle_matches_golden_files(tmp_path):
    bundle = run_pipeline(_cfg(tmp_path))
    for name in ("results.csv", "results.json", "importance.csv", "importance.svg", "metrics.json"):
        assert (tmp_path / name).read_text() == (GOLDEN / f"pipeline_{name}").read_text(), name
    assert set(OUTPUT_FILES) <= set(bundle.files)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert set(man) == MANIFEST_KEYS and man["status"] == "ok"
    assert "timings" not in man


def test_importance_csv_sorted_and_svg_well_formed(tmp_path):
    run_pipeline(_cfg(tmp_path, top_k=3))
    rows = (tmp_path / "importance.csv").read_text().strip().splitlines()[1:]
    vals = [float(r.split(",")[2]) for r in rows]
    assert vals == sorted(vals, reverse=True)
    root = ET.parse(tmp_path / "importance.svg").getroot()
    assert len(root.findall("{http://www.w3.org/2000/svg}rect")) == 3


def test_repeat_is_byte_identical(tmp_path):
    run_pipeline(_cfg(tmp_path / "a", seed=5, imputer="knn"))
    run_pipeline(_cfg(tmp_path / "b", seed=5, imputer="knn"))
    for name in ("results.csv", "results.json", "importance.csv", "importance.svg", "metrics.json", "model.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    ma["config"].pop("out_dir"), mb["config"].pop("out_dir")
    assert ma == mb


def test_grid_search_recorded(tmp_path):
    cfg = _cfg(tmp_path, grid=["cart:max_depth=1", "cart:max_depth=3"], folds=2)
    run_pipeline(cfg)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["grid_search"]["best"]["kind"] == "cart"
    assert len(man["grid_search"]["scores"]) == 2


def test_non_tree_model_gets_forest_importance(tmp_path):
    run_pipeline(_cfg(tmp_path, classifier="gnb"))
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["importance_model"] == "forest"


def test_record_time_adds_timings(tmp_path):
    run_pipeline(_cfg(tmp_path, record_time=True))
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert {"ingest", "impute", "fit"} <= set(man["timings"])


def test_failure_writes_error_manifest(tmp_path):
    bad = tmp_path / "labels.csv"
    bad.write_text("country_code,year,outbreak\nC000,2000,7\n")
    with pytest.raises(PipelineError) as exc:
        run_pipeline(_cfg(tmp_path / "o", labels=str(bad)))
    assert exc.value.stage == "label_join"
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["status"] == "error" and man["error"]["stage"] == "label_join"


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        PipelineConfig(test_fraction=1.0)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"panle": "typo"}))
    with pytest.raises(ValueError):
        PipelineConfig.from_json(p)
