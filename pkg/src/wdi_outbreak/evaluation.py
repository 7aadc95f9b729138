"""Metrics, cross-validated grid search and the imputer x classifier benchmark."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import imputation
from .classifiers import ClassifierSpec, fit_classifier
from .data import LabeledDataset, RowKey, stratified_folds, stratified_split
from .parallel import ordered_map
from .resampling import ResampleConfig, resample
from .scaling import apply_scaler, fit_scaler

Hook = Callable[[str, tuple[RowKey, ...]], None]


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1_weighted: float
    precision: tuple[float, float]
    recall: tuple[float, float]
    f1: tuple[float, float]
    support: tuple[int, int]
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_weighted": self.f1_weighted,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "support": list(self.support),
            "confusion": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn},
        }


def compute_metrics(y_true, y_pred) -> Metrics:
    """Accuracy and support-weighted F1 with class 1 as the positive class.

    Precision of a class that is never predicted is 0, and so is the F1 of a
    class whose precision and recall are both 0.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {len(y_true)} labels vs {len(y_pred)} predictions")
    n = len(y_true)
    if n == 0:
        raise ValueError("cannot score an empty prediction set")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    prec, rec, f1, sup = [], [], [], []
    # per class c: (true c predicted c, predicted c, actual c)
    for hit, predicted, actual in ((tn, tn + fn, tn + fp), (tp, tp + fp, tp + fn)):
        p = hit / predicted if predicted else 0.0
        r = hit / actual if actual else 0.0
        prec.append(p)
        rec.append(r)
        f1.append(2 * p * r / (p + r) if p + r > 0 else 0.0)
        sup.append(actual)
    weighted = sum(s / n * f for s, f in zip(sup, f1))
    return Metrics((tp + tn) / n, weighted, tuple(prec), tuple(rec), tuple(f1), tuple(sup), tp, fp, fn, tn)


@dataclass(frozen=True)
class PreprocessConfig:
    scaler: str | None = "robust"
    quantile_range: tuple[float, float] = (0.25, 0.75)
    resample: str = "smote-tomek"
    resample_cfg: ResampleConfig = ResampleConfig()


def _prepare(train: LabeledDataset, others: Sequence[LabeledDataset], pre: PreprocessConfig, seed: int, hook: Hook | None):
    """Fit the scaler on ``train``, transform everything, resample ``train`` only."""
    if pre.scaler:
        params = fit_scaler(train.table, pre.scaler, pre.quantile_range)
        if hook:
            hook("scaler_fit", train.table.row_keys)
        train = train.with_table(apply_scaler(params, train.table))
        others = [o.with_table(apply_scaler(params, o.table)) for o in others]
    if hook and pre.resample != "none":
        hook("resample", train.table.row_keys)
    train = resample(train, pre.resample, pre.resample_cfg, seed)
    return train, others


# --------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class GridResult:
    best: ClassifierSpec
    cv_f1: float
    cv_accuracy: float
    scores: tuple[tuple[str, float, float], ...]  # (label, mean f1, mean accuracy) in grid order


def grid_search(
    grid: Sequence[ClassifierSpec],
    train: LabeledDataset,
    folds: int = 5,
    seed: int = 0,
    pre: PreprocessConfig | None = None,
) -> GridResult:
    """Pick the grid entry with the best mean weighted F1 over stratified folds.

    Ties go to the higher mean accuracy, then to the earlier grid entry.
    Scaling and resampling (``pre``) are refitted inside every fold.
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    pre = pre or PreprocessConfig(scaler=None, resample="none")
    fold_idx = stratified_folds(train.labels, folds, seed)
    fold_seeds = np.random.SeedSequence(seed).generate_state(folds)

    prepared = []
    for k, val in enumerate(fold_idx):
        fit_rows = np.setdiff1d(np.arange(train.n_rows), val)
        tr, (va,) = _prepare(train.take(fit_rows), [train.take(val)], pre, int(fold_seeds[k]), None)
        prepared.append((tr, va))

    def score(spec):
        f1s, accs = [], []
        for k, (tr, va) in enumerate(prepared):
            model = fit_classifier(spec, tr, int(fold_seeds[k]))
            m = compute_metrics(va.y, model.predict(va.X))
            f1s.append(m.f1_weighted)
            accs.append(m.accuracy)
        return float(np.mean(f1s)), float(np.mean(accs))

    results = ordered_map(score, list(grid))
    best = max(range(len(grid)), key=lambda i: (results[i][0], results[i][1], -i))
    return GridResult(
        grid[best],
        results[best][0],
        results[best][1],
        tuple((s.label(), f, a) for s, (f, a) in zip(grid, results)),
    )


# --------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class BenchmarkConfig:
    test_fraction: float = 0.2
    knn_k: int = 5
    preprocess: PreprocessConfig = PreprocessConfig()
    fit_imputer_on: str = "train"  # "train" | "all"
    resample_before_split: bool = False
    record_time: bool = False


@dataclass
class BenchmarkRow:
    imputer: str
    classifier: str
    metrics: Metrics | None
    seconds: float | None
    seed: int
    error: str | None = None


@dataclass
class ResultsTable:
    rows: list[BenchmarkRow] = field(default_factory=list)

    def get(self, imputer: str, classifier: str) -> BenchmarkRow:
        for r in self.rows:
            if r.imputer == imputer and r.classifier == classifier:
                return r
        raise KeyError((imputer, classifier))

    def add(self, row: BenchmarkRow) -> None:
        if any(r.imputer == row.imputer and r.classifier == row.classifier for r in self.rows):
            raise ValueError(f"duplicate results key ({row.imputer}, {row.classifier})")
        self.rows.append(row)

    def imputers(self) -> list[str]:
        return list(dict.fromkeys(r.imputer for r in self.rows))

    def classifiers(self) -> list[str]:
        return list(dict.fromkeys(r.classifier for r in self.rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["imputer", "classifier", "f1", "accuracy", "seconds", "seed"])
        for r in self.rows:
            f1 = "" if r.metrics is None else repr(r.metrics.f1_weighted)
            acc = "" if r.metrics is None else repr(r.metrics.accuracy)
            secs = "" if r.seconds is None else f"{r.seconds:.3f}"
            w.writerow([r.imputer, r.classifier, f1, acc, secs, r.seed])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = [
            {
                "imputer": r.imputer,
                "classifier": r.classifier,
                "metrics": None if r.metrics is None else r.metrics.to_dict(),
                "seconds": r.seconds,
                "seed": r.seed,
                "error": r.error,
            }
            for r in self.rows
        ]
        return json.dumps({"rows": doc}, indent=2) + "\n"

    def to_markdown(self) -> str:
        """Classifiers as rows, an (F1, Accuracy) column pair per imputer."""
        imps = self.imputers()
        head = "| Algorithm | " + " | ".join(f"{i} F1 | {i} Accuracy" for i in imps) + " |"
        sep = "|---|" + "---|---|" * len(imps)
        lines = [head, sep]
        for c in self.classifiers():
            cells = []
            for i in imps:
                try:
                    m = self.get(i, c).metrics
                except KeyError:
                    m = None
                cells += ["failed", "failed"] if m is None else [f"{m.f1_weighted:.3f}", f"{m.accuracy:.3f}"]
            lines.append(f"| {c} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def derive_seeds(seed: int) -> dict[str, int]:
    names = ("split", "impute_train", "impute_test", "resample", "model")
    state = np.random.SeedSequence(seed).generate_state(len(names))
    return {n: int(s) for n, s in zip(names, state)}


def impute_pair(method, train, test, cfg: BenchmarkConfig, seeds, hook=None):
    fit_on = train.table
    if cfg.fit_imputer_on == "all":
        from .data import PanelTable

        fit_on = PanelTable(
            train.table.row_keys + test.table.row_keys,
            train.table.feature_names,
            np.vstack([train.table.values, test.table.values]),
            np.vstack([train.table.mask, test.table.mask]),
        )
    model = imputation.fit_imputer(method, fit_on, k=cfg.knn_k)
    if hook:
        hook("imputer_fit", fit_on.row_keys)
    tr = train.with_table(model.transform(train.table, seeds["impute_train"]))
    te = test.with_table(model.transform(test.table, seeds["impute_test"]))
    return model, tr, te


def prepared_splits(raw: LabeledDataset, method: str, cfg: BenchmarkConfig, seed: int, hook: Hook | None = None):
    """Split, impute, scale and resample; returns (train_ready, test_ready)."""
    seeds = derive_seeds(seed)
    if cfg.resample_before_split:
        # leaky ordering kept only to compare against the default
        whole = raw
        model = imputation.fit_imputer(method, whole.table, k=cfg.knn_k)
        whole = whole.with_table(model.transform(whole.table, seeds["impute_train"]))
        whole, _ = _prepare(whole, [], cfg.preprocess, seeds["resample"], hook)
        return stratified_split(whole, cfg.test_fraction, seeds["split"])
    train, test = stratified_split(raw, cfg.test_fraction, seeds["split"])
    _, train, test = impute_pair(method, train, test, cfg, seeds, hook)
    train, (test,) = _prepare(train, [test], cfg.preprocess, seeds["resample"], hook)
    return train, test


def run_benchmark(
    raw: LabeledDataset,
    imputers: Sequence[str],
    specs: Sequence[ClassifierSpec],
    cfg: BenchmarkConfig = BenchmarkConfig(),
    seed: int = 0,
    hook: Hook | None = None,
) -> ResultsTable:
    """Evaluate every (imputer, classifier) pair on one stratified holdout.

    The split and all derived seeds are shared across cells. A failing cell
    is recorded with its error message instead of aborting the run.
    """
    table = ResultsTable()
    model_seed = derive_seeds(seed)["model"]
    for method in imputers:
        t0 = time.perf_counter()
        try:
            train, test = prepared_splits(raw, method, cfg, seed, hook)
            prep_error = None
        except Exception as exc:  # recorded per cell
            prep_error = f"{type(exc).__name__}: {exc}"
        prep_secs = time.perf_counter() - t0

        def cell(spec):
            if prep_error is not None:
                return BenchmarkRow(method, spec.label(), None, None, seed, prep_error)
            t1 = time.perf_counter()
            try:
                if hook:
                    hook("model_fit", train.table.row_keys)
                model = fit_classifier(spec, train, model_seed)
                metrics = compute_metrics(test.y, model.predict(test.X))
                err = None
            except Exception as exc:
                metrics, err = None, f"{type(exc).__name__}: {exc}"
            secs = prep_secs + time.perf_counter() - t1 if cfg.record_time else None
            return BenchmarkRow(method, spec.label(), metrics, secs, seed, err)

        for row in ordered_map(cell, list(specs)):
            table.add(row)
    return table
