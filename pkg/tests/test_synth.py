import numpy as np
import pytest

from wdi_outbreak.data import PanelTable
from wdi_outbreak.evaluation import compute_metrics
from wdi_outbreak.synth import SynthConfig, generate_synthetic_panel, inject_missingness


def test_shape_keys_and_rate():
    ds, truth = generate_synthetic_panel(SynthConfig(), 0, bayes_sample_countries=100)
    assert ds.table.values.shape == (4000, 143)
    assert ds.table.row_keys[0] == ("C000", 2000) and ds.table.row_keys[19] == ("C000", 2019)
    assert 0.08 <= ds.labels.mean() <= 0.12
    assert truth.informative == (0, 1, 2)


def test_no_signal_case():
    cfg = SynthConfig(countries=100, years=10, features=5, informative=(), effects=(), imbalance=0.3)
    ds, truth = generate_synthetic_panel(cfg, 1, bayes_sample_countries=100)
    p = truth.positive_rate
    assert truth.bayes_accuracy <= max(p, 1 - p) + 0.05


def test_bayes_accuracy_grows_with_effect():
    # effects act on unit-scale features, so the logistic link keeps some
    # irreducible error at effect 10; it drops below 1% near effect 50
    accs = []
    for effect in (1.0, 10.0, 60.0):
        cfg = SynthConfig(countries=100, years=10, features=4, informative=(2,), effects=(effect,), noise_std=0.0, imbalance=0.3)
        accs.append(generate_synthetic_panel(cfg, 2, bayes_sample_countries=200)[1].bayes_accuracy)
    assert accs[0] < accs[1] < accs[2]
    assert accs[1] >= 0.95
    assert accs[2] >= 0.99


def test_probabilities_give_bayes_rule():
    cfg = SynthConfig(countries=60, years=10, features=6, informative=(1, 4), effects=(4, 4))
    ds, truth = generate_synthetic_panel(cfg, 3, bayes_sample_countries=50)
    X = truth.complete.values
    pred = (truth.probabilities(X) > 0.5).astype(int)
    # the Bayes rule fitted to the true probabilities beats the base rate
    assert compute_metrics(ds.labels, pred).accuracy > max(ds.labels.mean(), 1 - ds.labels.mean())


def test_deterministic():
    cfg = SynthConfig(countries=20, years=5, features=6, informative=(0,), effects=(3,), missing_rate=0.2)
    a, _ = generate_synthetic_panel(cfg, 7, bayes_sample_countries=10)
    b, _ = generate_synthetic_panel(cfg, 7, bayes_sample_countries=10)
    np.testing.assert_array_equal(a.table.mask, b.table.mask)
    np.testing.assert_array_equal(a.table.values, b.table.values)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_missingness_mechanisms(rng):
    t = PanelTable.from_array(rng.normal(size=(1000, 10)))
    assert inject_missingness(t, "MCAR", 0.0, 1) is t
    mc = inject_missingness(t, "MCAR", 0.2, 1)
    assert 0.19 <= 1 - mc.mask.mean() <= 0.21
    mar = inject_missingness(t, "MAR", 0.2, 1)
    assert mar.mask[:, 0].all()
    assert 0.17 <= 1 - mar.mask[:, 1:].mean() <= 0.23
    with pytest.raises(ValueError):
        inject_missingness(t, "MNAR", 0.2, 1)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(informative=(0, 1), effects=(1.0,))
    with pytest.raises(ValueError):
        SynthConfig(informative=(500,), effects=(1.0,))


def test_imputers_beat_column_means():
    from wdi_outbreak.imputation import fit_imputer

    cfg = SynthConfig(countries=60, years=10, features=12, informative=(0,), effects=(3,), missing_rate=0.2,
                      shared_fraction=0.8)
    ds, truth = generate_synthetic_panel(cfg, 4, bayes_sample_countries=20)
    t = ds.table
    miss = ~t.mask
    true = truth.complete.values[miss]

    def rmse(values):
        return float(np.sqrt(np.mean((values[miss] - true) ** 2)))

    col_means = np.where(t.mask, t.values, np.nanmean(t.values, axis=0))
    base = rmse(col_means)
    for method in ("knn", "msreg"):
        assert rmse(fit_imputer(method, t).transform(t, 0).values) <= base, method


@pytest.mark.slow
def test_three_of_fifty_recovered_in_nine_of_ten_seeds():
    from wdi_outbreak.classifiers import ClassifierSpec, fit_classifier, gini_importance
    from wdi_outbreak.evaluation import BenchmarkConfig, prepared_splits

    cfg = SynthConfig(features=50, informative=(5, 17, 33), missing_rate=0.1)
    hits = 0
    for seed in range(10):
        ds, _ = generate_synthetic_panel(cfg, seed, bayes_sample_countries=20)
        train, _ = prepared_splits(ds, "random", BenchmarkConfig(), seed)
        model = fit_classifier(ClassifierSpec("forest", {"n_trees": 60}), train, seed)
        top5 = set(gini_importance(model, 50).ranking()[:5].tolist())
        hits += {5, 17, 33} <= top5
    assert hits >= 9
