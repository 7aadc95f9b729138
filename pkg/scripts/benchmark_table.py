"""Imputer x classifier benchmark on a synthetic planted-signal panel.

Writes results.csv / results.json / results.md under --out and prints the
Markdown table (classifiers as rows, an F1/accuracy pair per imputer).

    python3 scripts/benchmark_table.py --out runs/table --seed 0
    python3 scripts/benchmark_table.py --permute-labels --imbalance 0.5   # null control
"""

import argparse
from pathlib import Path

import numpy as np

from wdi_outbreak.classifiers import ClassifierSpec
from wdi_outbreak.data import LabeledDataset
from wdi_outbreak.evaluation import BenchmarkConfig, run_benchmark
from wdi_outbreak.report import write_text
from wdi_outbreak.synth import SynthConfig, generate_synthetic_panel

CLASSIFIERS = ("forest", "bagging", "cart", "adaboost", "voting", "gnb", "sgd")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/table", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="generator and benchmark seed")
    p.add_argument("--imbalance", type=float, default=0.1, help="positive rate of the panel")
    p.add_argument("--missing-rate", type=float, default=0.2, help="MCAR missing share")
    p.add_argument("--permute-labels", action="store_true", help="shuffle labels to destroy the signal")
    p.add_argument("--timings", action="store_true", help="record per-cell seconds")
    a = p.parse_args()

    cfg = SynthConfig(missing_rate=a.missing_rate, imbalance=a.imbalance, informative=(7, 42, 99))
    ds, truth = generate_synthetic_panel(cfg, a.seed)
    if a.permute_labels:
        ds = LabeledDataset(ds.table, ds.labels[np.random.default_rng(12345).permutation(ds.n_rows)])
    table = run_benchmark(ds, ("knn", "random", "msreg"), [ClassifierSpec(c) for c in CLASSIFIERS],
                          BenchmarkConfig(record_time=a.timings), a.seed)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "results.csv", table.to_csv())
    write_text(out / "results.json", table.to_json())
    write_text(out / "results.md", table.to_markdown())
    print(f"Bayes accuracy of the generator: {truth.bayes_accuracy:.3f}")
    print(table.to_markdown())


if __name__ == "__main__":
    main()
