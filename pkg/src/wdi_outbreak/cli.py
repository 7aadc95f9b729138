"""Command line for the wdi-outbreak pipeline.

Exit codes: 0 success, 1 runtime failure, 2 usage error (argparse).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import imputation, parallel
from .classifiers import ClassifierSpec, fit_classifier, gini_importance, model_from_dict, model_to_dict
from .data import (
    DEFAULT_MISSING_TOKENS,
    LabeledDataset,
    attach_labels,
    encode_categoricals,
    load_panel_csv,
    missingness_profile,
    stratified_split,
    write_labels_csv,
    write_panel_csv,
)
from .evaluation import BenchmarkConfig, PreprocessConfig, compute_metrics, run_benchmark
from .pipeline import PipelineConfig, PipelineError, run_pipeline
from .report import dumps, importance_csv, importance_svg, write_text
from .resampling import METHODS as RESAMPLE_METHODS
from .resampling import ResampleConfig, resample
from .scaling import KINDS as SCALERS
from .scaling import ScalerParams, apply_scaler, fit_scaler
from .synth import SynthConfig, generate_synthetic_panel


def _quantile_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo,hi such as 0.25,0.75") from None
    if not 0 < lo < hi < 1:
        raise argparse.ArgumentTypeError("need 0 < lo < hi < 1")
    return lo, hi


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _spec(text: str) -> ClassifierSpec:
    try:
        return ClassifierSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_dataset(panel, labels, tokens) -> LabeledDataset:
    table = load_panel_csv(panel, tokens)
    ds, _ = attach_labels(table, labels)
    return ds


def _write_json(path, doc):
    write_text(path, dumps(doc))


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(a):
    table = load_panel_csv(a.panel, a.missing_token, a.categorical)
    if a.encode:
        table = encode_categoricals(table, a.encode, a.categorical + (["country_code"] if a.encode_country else []))
    ds, join = attach_labels(table, a.labels)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = stratified_split(ds, a.test_fraction, a.seed)
    for name, part in (("train", train), ("test", test)):
        write_panel_csv(part.table, out / f"{name}_panel.csv")
        write_labels_csv(part, out / f"{name}_labels.csv")
    rep = missingness_profile(table)
    _write_json(out / "ingest.json", {
        "rows": ds.n_rows,
        "features": table.n_features,
        "positives": int(ds.labels.sum()),
        "labels_matched": join.matched,
        "labels_skipped": join.skipped,
        "missing_overall": rep.overall,
        "missing_per_feature": rep.per_feature,
        "train_rows": train.n_rows,
        "test_rows": test.n_rows,
        "seed": a.seed,
    })


def cmd_impute(a):
    train = load_panel_csv(a.train, a.missing_token)
    if a.model:
        model = imputation.imputer_from_dict(_read_json(a.model))
    else:
        model = imputation.fit_imputer(a.method, train, k=a.k)
    target = load_panel_csv(a.target, a.missing_token) if a.target else train
    write_panel_csv(model.transform(target, a.seed), a.out)
    if a.model_out:
        _write_json(a.model_out, model.to_dict())


def cmd_scale(a):
    train = load_panel_csv(a.train)
    if a.params:
        params = ScalerParams.from_dict(_read_json(a.params))
    else:
        params = fit_scaler(train, a.method, a.quantile_range)
    target = load_panel_csv(a.target) if a.target else train
    write_panel_csv(apply_scaler(params, target), a.out)
    if a.params_out:
        _write_json(a.params_out, params.to_dict())


def cmd_resample(a):
    ds = _load_dataset(a.panel, a.labels, DEFAULT_MISSING_TOKENS)
    cfg = ResampleConfig(a.smote_k, a.target_ratio, True)
    out = resample(ds, a.resample, cfg, a.seed)
    write_panel_csv(out.table, a.out_panel)
    write_labels_csv(out, a.out_labels)


def cmd_train(a):
    ds = _load_dataset(a.panel, a.labels, DEFAULT_MISSING_TOKENS)
    model = fit_classifier(a.classifier, ds, a.seed)
    _write_json(a.model_out, model_to_dict(model, ds.table.feature_names, a.classifier))


def cmd_evaluate(a):
    doc = _read_json(a.model)
    model = model_from_dict(doc)
    ds = _load_dataset(a.panel, a.labels, DEFAULT_MISSING_TOKENS)
    metrics = compute_metrics(ds.y, model.predict(ds.X)).to_dict()
    if a.out:
        _write_json(a.out, metrics)
    else:
        sys.stdout.write(dumps(metrics))


def cmd_importance(a):
    doc = _read_json(a.model)
    model = model_from_dict(doc)
    names = doc.get("feature_names")
    if names is None:
        names = [f"f{j}" for j in range(model.n_features)]
    imp = gini_importance(model, len(names)).values
    write_text(a.out_csv, importance_csv(names, imp))
    if a.out_svg:
        write_text(a.out_svg, importance_svg(names, imp, a.top_k))


def cmd_benchmark(a):
    ds = _load_dataset(a.panel, a.labels, a.missing_token)
    pre = PreprocessConfig(a.scaler, a.quantile_range, a.resample, ResampleConfig(a.smote_k, a.target_ratio, True))
    cfg = BenchmarkConfig(a.test_fraction, a.k, pre, record_time=a.timings)
    table = run_benchmark(ds, a.imputers.split(","), a.classifiers, cfg, a.seed)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "results.csv", table.to_csv())
    write_text(out / "results.json", table.to_json())
    write_text(out / "results.md", table.to_markdown())
    failed = [r for r in table.rows if r.error]
    for r in failed:
        print(f"cell ({r.imputer}, {r.classifier}) failed: {r.error}", file=sys.stderr)


def cmd_synth(a):
    cfg = SynthConfig(
        countries=a.countries,
        years=a.years,
        features=a.features,
        informative=a.informative,
        effects=a.effects if a.effects else (5.0,) * len(a.informative),
        imbalance=a.imbalance,
        noise_std=a.noise_std,
        missing_rate=a.missing_rate,
        mechanism=a.mechanism,
    )
    ds, truth = generate_synthetic_panel(cfg, a.seed)
    if a.permute_labels:
        rng = np.random.default_rng(a.seed + 1)
        ds = LabeledDataset(ds.table, rng.permutation(ds.labels))
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_panel_csv(ds.table, out / "panel.csv")
    write_labels_csv(ds, out / "labels.csv")
    _write_json(out / "truth.json", {**truth.to_dict(), "seed": a.seed, "feature_names": list(ds.table.feature_names),
                                      "permuted_labels": a.permute_labels})


_PIPELINE_FLAGS = (
    "panel", "labels", "imputer", "knn_k", "scaler", "quantile_range", "resample", "smote_k",
    "target_ratio", "classifier", "test_fraction", "folds", "seed", "top_k", "importance_data",
    "fit_imputer_on",
)


def cmd_pipeline(a):
    cfg = PipelineConfig.from_json(a.config) if a.config else PipelineConfig()
    for name in _PIPELINE_FLAGS:
        value = getattr(a, name)
        if value is not None:
            setattr(cfg, name, value.to_dict() if isinstance(value, ClassifierSpec) else value)
    if a.grid:
        cfg.grid = [g.to_dict() for g in a.grid]
    if a.no_year_feature:
        cfg.year_feature = False
    if a.timings:
        cfg.record_time = True
    cfg.out_dir = a.out
    cfg.__post_init__()
    if not cfg.panel or not cfg.labels:
        raise ValueError("pipeline needs --panel and --labels (or a config file naming them)")
    bundle = run_pipeline(cfg)
    m = bundle.metrics
    print(f"accuracy {m.accuracy:.4f}  weighted F1 {m.f1_weighted:.4f}  -> {bundle.out_dir}")


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wdi-outbreak", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="worker threads for ensembles and grids (default: all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def tokens(sp):
        sp.add_argument("--missing-token", action="append", default=None,
                        help="cell text meaning 'missing' (repeatable; default: empty, NA, ..)")

    s = sub.add_parser("ingest", help="load panel + labels, write a stratified train/test split")
    s.add_argument("--panel", required=True, help="panel CSV (country_code,year,<features>)")
    s.add_argument("--labels", required=True, help="labels CSV (country_code,year,outbreak)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--test-fraction", type=float, default=0.2, help="holdout share (default 0.2)")
    s.add_argument("--seed", type=int, default=0, help="split seed")
    s.add_argument("--categorical", action="append", default=[], help="string-valued column to encode (repeatable)")
    s.add_argument("--encode", choices=("one-hot", "ordinal"), default=None, help="encoding for categorical columns")
    s.add_argument("--encode-country", action="store_true", help="also encode country_code as a feature")
    tokens(s)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("impute", help="fit an imputer and fill missing cells")
    s.add_argument("--train", required=True, help="panel CSV the imputer is fitted on")
    s.add_argument("--target", help="panel CSV to fill (default: the training panel)")
    s.add_argument("--out", required=True, help="output panel CSV")
    s.add_argument("--method", choices=imputation.METHODS, default="knn", help="imputer")
    s.add_argument("--k", type=int, default=5, help="neighbours for knn (default 5)")
    s.add_argument("--seed", type=int, default=0, help="seed for stochastic imputers")
    s.add_argument("--model", help="reuse a fitted imputer JSON instead of fitting")
    s.add_argument("--model-out", help="write the fitted imputer as JSON")
    tokens(s)
    s.set_defaults(func=cmd_impute)

    s = sub.add_parser("scale", help="fit a scaler on a complete panel and apply it")
    s.add_argument("--train", required=True, help="complete panel CSV to fit on")
    s.add_argument("--target", help="panel CSV to transform (default: the training panel)")
    s.add_argument("--out", required=True, help="output panel CSV")
    s.add_argument("--method", choices=SCALERS, default="robust", help="scaler")
    s.add_argument("--quantile-range", type=_quantile_range, default=(0.25, 0.75), help="robust/logdev quantiles lo,hi")
    s.add_argument("--params", help="reuse fitted scaler JSON")
    s.add_argument("--params-out", help="write fitted scaler JSON")
    s.set_defaults(func=cmd_scale)

    s = sub.add_parser("resample", help="rebalance a complete training panel")
    s.add_argument("--panel", required=True, help="complete panel CSV")
    s.add_argument("--labels", required=True, help="labels CSV")
    s.add_argument("--out-panel", required=True, help="resampled panel CSV")
    s.add_argument("--out-labels", required=True, help="resampled labels CSV")
    s.add_argument("--resample", choices=RESAMPLE_METHODS, default="smote-tomek", help="method")
    s.add_argument("--smote-k", type=int, default=5, help="SMOTE neighbours (default 5)")
    s.add_argument("--target-ratio", type=float, default=1.0, help="minority/majority ratio after SMOTE")
    s.add_argument("--seed", type=int, default=0, help="SMOTE seed")
    s.set_defaults(func=cmd_resample)

    s = sub.add_parser("train", help="fit a classifier, write model JSON")
    s.add_argument("--panel", required=True, help="complete panel CSV")
    s.add_argument("--labels", required=True, help="labels CSV")
    s.add_argument("--classifier", type=_spec, default=ClassifierSpec("forest"),
                   help="kind[:param=value,...], kinds: cart forest bagging adaboost gnb sgd voting")
    s.add_argument("--seed", type=int, default=0, help="model seed")
    s.add_argument("--model-out", required=True, help="output model JSON")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a saved model on a labelled panel")
    s.add_argument("--model", required=True, help="model JSON")
    s.add_argument("--panel", required=True, help="complete panel CSV")
    s.add_argument("--labels", required=True, help="labels CSV")
    s.add_argument("--out", help="metrics JSON (default: stdout)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("importance", help="Gini importance of a saved tree model")
    s.add_argument("--model", required=True, help="cart/forest/bagging model JSON")
    s.add_argument("--out-csv", required=True, help="ranked importance CSV")
    s.add_argument("--out-svg", help="bar chart SVG")
    s.add_argument("--top-k", type=int, default=15, help="bars in the chart (default 15)")
    s.set_defaults(func=cmd_importance)

    s = sub.add_parser("benchmark", help="imputer x classifier grid on one holdout split")
    s.add_argument("--panel", required=True, help="panel CSV (may contain missing cells)")
    s.add_argument("--labels", required=True, help="labels CSV")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--imputers", default="knn,random,msreg", help="comma list from knn,msreg,random")
    s.add_argument("--classifiers", type=_spec, nargs="+",
                   default=[ClassifierSpec(k) for k in ("forest", "bagging", "cart", "adaboost", "voting", "gnb", "sgd")],
                   help="classifier specs, kind[:param=value,...]")
    s.add_argument("--k", type=int, default=5, help="knn neighbours")
    s.add_argument("--scaler", choices=SCALERS, default="robust", help="scaler")
    s.add_argument("--quantile-range", type=_quantile_range, default=(0.25, 0.75), help="lo,hi")
    s.add_argument("--resample", choices=RESAMPLE_METHODS, default="smote-tomek", help="training-split resampling")
    s.add_argument("--smote-k", type=int, default=5, help="SMOTE neighbours")
    s.add_argument("--target-ratio", type=float, default=1.0, help="minority/majority ratio after SMOTE")
    s.add_argument("--test-fraction", type=float, default=0.2, help="holdout share")
    s.add_argument("--seed", type=int, default=0, help="master seed")
    s.add_argument("--timings", action="store_true", help="record wall-clock seconds (makes output non-reproducible)")
    tokens(s)
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("synth", help="write a synthetic panel with planted signal")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--countries", type=int, default=200, help="number of countries")
    s.add_argument("--years", type=int, default=20, help="years per country")
    s.add_argument("--features", type=int, default=143, help="indicator columns")
    s.add_argument("--informative", type=_int_list, default=(0, 1, 2), help="informative column indices, comma list")
    s.add_argument("--effects", type=_float_list, default=None, help="effect sizes, comma list (default 5 each)")
    s.add_argument("--imbalance", type=float, default=0.1, help="positive rate")
    s.add_argument("--noise-std", type=float, default=0.2, help="per-cell noise")
    s.add_argument("--missing-rate", type=float, default=0.2, help="share of cells masked")
    s.add_argument("--mechanism", choices=("MCAR", "MAR"), default="MCAR", help="missingness mechanism")
    s.add_argument("--permute-labels", action="store_true", help="shuffle labels (null-signal control)")
    s.add_argument("--seed", type=int, default=0, help="generator seed")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pipeline", help="full run with report bundle")
    s.add_argument("--config", help="JSON file with PipelineConfig fields; flags override it")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--panel", default=None, help="panel CSV")
    s.add_argument("--labels", default=None, help="labels CSV")
    s.add_argument("--imputer", choices=imputation.METHODS, default=None, help="imputer (default msreg)")
    s.add_argument("--knn-k", type=int, default=None, help="knn neighbours")
    s.add_argument("--fit-imputer-on", choices=("train", "all"), default=None, help="imputer fitting rows (default train)")
    s.add_argument("--scaler", choices=SCALERS, default=None, help="scaler (default robust)")
    s.add_argument("--quantile-range", type=_quantile_range, default=None, help="lo,hi")
    s.add_argument("--resample", choices=RESAMPLE_METHODS, default=None, help="resampling (default smote-tomek)")
    s.add_argument("--smote-k", type=int, default=None, help="SMOTE neighbours")
    s.add_argument("--target-ratio", type=float, default=None, help="minority/majority ratio after SMOTE")
    s.add_argument("--classifier", type=_spec, default=None, help="classifier spec (default forest)")
    s.add_argument("--grid", type=_spec, nargs="+", default=None, help="specs for cross-validated selection")
    s.add_argument("--test-fraction", type=float, default=None, help="holdout share (default 0.2)")
    s.add_argument("--folds", type=int, default=None, help="grid-search folds (default 5)")
    s.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    s.add_argument("--top-k", type=int, default=None, help="bars in the importance chart (default 15)")
    s.add_argument("--importance-data", choices=("resampled", "original"), default=None,
                   help="training data behind the importance forest")
    s.add_argument("--no-year-feature", action="store_true", help="do not add the year as a feature")
    s.add_argument("--timings", action="store_true", help="record stage timings (non-reproducible)")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    parallel.set_threads(args.threads)
    if getattr(args, "missing_token", "unset") is None:
        args.missing_token = sorted(DEFAULT_MISSING_TOKENS)
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
