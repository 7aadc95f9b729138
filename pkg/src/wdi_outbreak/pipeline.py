"""End-to-end run: ingest, split, impute, scale, resample, fit, evaluate, explain."""

from __future__ import annotations

import json
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .classifiers import ClassifierSpec, ForestModel, Tree, fit_classifier, gini_importance, model_to_dict
from .data import (
    DEFAULT_MISSING_TOKENS,
    LabeledDataset,
    add_year_feature,
    attach_labels,
    load_panel_csv,
    missingness_profile,
    stratified_split,
)
from .evaluation import (
    BenchmarkConfig,
    BenchmarkRow,
    PreprocessConfig,
    ResultsTable,
    _prepare,
    compute_metrics,
    derive_seeds,
    grid_search,
    impute_pair,
)
from .report import dumps, importance_csv, importance_svg, write_text
from .resampling import ResampleConfig

OUTPUT_FILES = ("results.csv", "results.json", "importance.csv", "importance.svg", "metrics.json", "manifest.json")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    panel: str = ""
    labels: str = ""
    out_dir: str = "out"
    missing_tokens: list[str] = field(default_factory=lambda: sorted(DEFAULT_MISSING_TOKENS))
    year_feature: bool = True
    imputer: str = "msreg"
    knn_k: int = 5
    fit_imputer_on: str = "train"
    scaler: str = "robust"
    quantile_range: tuple[float, float] = (0.25, 0.75)
    resample: str = "smote-tomek"
    smote_k: int = 5
    target_ratio: float = 1.0
    classifier: Any = "forest"
    grid: list[Any] = field(default_factory=list)
    test_fraction: float = 0.2
    folds: int = 5
    seed: int = 0
    top_k: int = 15
    importance_data: str = "resampled"  # or "original"
    record_time: bool = False

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.importance_data not in ("resampled", "original"):
            raise ValueError("importance_data must be 'resampled' or 'original'")
        if self.fit_imputer_on not in ("train", "all"):
            raise ValueError("fit_imputer_on must be 'train' or 'all'")
        self.quantile_range = tuple(float(q) for q in self.quantile_range)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantile_range"] = list(self.quantile_range)
        return d

    def spec(self) -> ClassifierSpec:
        return _as_spec(self.classifier)

    def grid_specs(self) -> list[ClassifierSpec]:
        return [_as_spec(g) for g in self.grid]

    def preprocess(self) -> PreprocessConfig:
        return PreprocessConfig(
            scaler=self.scaler or None,
            quantile_range=self.quantile_range,
            resample=self.resample,
            resample_cfg=ResampleConfig(self.smote_k, self.target_ratio, True),
        )


def _as_spec(obj) -> ClassifierSpec:
    if isinstance(obj, ClassifierSpec):
        return obj
    if isinstance(obj, str):
        return ClassifierSpec.parse(obj)
    return ClassifierSpec.from_dict(obj)


def _versions() -> dict:
    import numba

    return {
        "wdi_outbreak": __version__,
        "numpy": np.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
    }


@dataclass
class ReportBundle:
    out_dir: Path
    files: dict[str, Path]
    metrics: Any
    importance: np.ndarray
    feature_names: tuple[str, ...]
    manifest: dict


def run_pipeline(cfg: PipelineConfig) -> ReportBundle:
    """Run every stage and write the report bundle under ``cfg.out_dir``.

    On failure an error manifest is written next to whatever artifacts
    were already produced and :class:`PipelineError` is raised.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict[str, Any] = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": _versions(),
        "status": "running",
    }
    timings: dict[str, float] = {}
    stage = "ingest"
    state: dict[str, Any] = {}

    def timed(name, fn):
        nonlocal stage
        stage = name
        t0 = time.perf_counter()
        result = fn()
        timings[name] = time.perf_counter() - t0
        return result

    try:
        table = timed("ingest", lambda: load_panel_csv(cfg.panel, cfg.missing_tokens))
        if cfg.year_feature:
            table = add_year_feature(table)
        manifest["missing_overall"] = missingness_profile(table).overall
        ds, join = timed("label_join", lambda: attach_labels(table, cfg.labels))
        manifest["labels"] = {"matched": join.matched, "skipped": join.skipped, "positives": int(ds.labels.sum()), "rows": ds.n_rows}

        seeds = derive_seeds(cfg.seed)
        train, test = timed("split", lambda: stratified_split(ds, cfg.test_fraction, seeds["split"]))
        bcfg = BenchmarkConfig(cfg.test_fraction, cfg.knn_k, cfg.preprocess(), cfg.fit_imputer_on)
        _, train, test = timed("impute", lambda: impute_pair(cfg.imputer, train, test, bcfg, seeds))
        scaled_pre = PreprocessConfig(cfg.scaler or None, cfg.quantile_range, "none")
        train_scaled, (test_scaled,) = timed("scale", lambda: _prepare(train, [test], scaled_pre, 0, None))
        train_ready = timed(
            "resample",
            lambda: _prepare(train_scaled, [], PreprocessConfig(None, cfg.quantile_range, cfg.resample, cfg.preprocess().resample_cfg), seeds["resample"], None)[0],
        )
        manifest["train_class_counts"] = list(train_ready.class_counts())

        spec = cfg.spec()
        if cfg.grid:
            # folds see the imputed but unscaled, unresampled training split
            gr = timed("grid_search", lambda: grid_search(cfg.grid_specs(), train, cfg.folds, cfg.seed, cfg.preprocess()))
            spec = gr.best
            manifest["grid_search"] = {
                "best": spec.to_dict(),
                "cv_f1": gr.cv_f1,
                "cv_accuracy": gr.cv_accuracy,
                "scores": [list(s) for s in gr.scores],
            }
        model = timed("fit", lambda: fit_classifier(spec, train_ready, seeds["model"]))
        metrics = timed("evaluate", lambda: compute_metrics(test_scaled.y, model.predict(test_scaled.X)))

        stage = "importance"
        imp_data = train_ready if cfg.importance_data == "resampled" else train_scaled
        if isinstance(model, (Tree, ForestModel)) and cfg.importance_data == "resampled":
            imp_model, imp_source = model, spec.label()
        else:
            forest_spec = spec if spec.kind in ("forest", "bagging", "cart") else ClassifierSpec("forest")
            imp_model = fit_classifier(forest_spec, imp_data, seeds["model"])
            imp_source = forest_spec.label()
        importance = gini_importance(imp_model, imp_data.table.n_features).values
        manifest["importance_model"] = imp_source
        manifest["importance_data"] = cfg.importance_data

        stage = "report"
        results = ResultsTable()
        results.add(BenchmarkRow(cfg.imputer, spec.label(), metrics, timings.get("fit") if cfg.record_time else None, cfg.seed))
        names = train_ready.table.feature_names
        files = {
            "results.csv": results.to_csv(),
            "results.json": results.to_json(),
            "importance.csv": importance_csv(names, importance),
            "importance.svg": importance_svg(names, importance, cfg.top_k),
            "metrics.json": dumps({"imputer": cfg.imputer, "classifier": spec.label(), **metrics.to_dict()}),
            "model.json": dumps(model_to_dict(model, names, spec)),
        }
        for name, text in files.items():
            write_text(out / name, text)
        manifest["status"] = "ok"
        if cfg.record_time:
            manifest["timings"] = timings
        manifest["files"] = sorted([*files, "manifest.json"])
        write_text(out / "manifest.json", dumps(manifest))
        return ReportBundle(out, {n: out / n for n in manifest["files"]}, metrics, importance, names, manifest)
    except Exception as exc:
        manifest["status"] = "error"
        manifest["error"] = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
        if cfg.record_time:
            manifest["timings"] = timings
        write_text(out / "manifest.json", dumps(manifest))
        raise PipelineError(stage, exc) from exc
