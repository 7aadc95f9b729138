import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wdi_outbreak.classifiers import (
    ClassifierSpec,
    Tree,
    fit_cart,
    fit_classifier,
    gini_importance,
    model_from_dict,
    model_to_dict,
    predict,
)
from wdi_outbreak.classifiers.ensemble import fit_adaboost, fit_bagging, fit_forest, majority_vote
from wdi_outbreak.classifiers.linear import fit_gnb, fit_sgd_logistic
from wdi_outbreak.classifiers.spec import fit_arrays
from wdi_outbreak.data import LabeledDataset

# jittered XOR: no axis split separates it, yet no depth-1 split has zero gain
XOR_X = np.array([[0.0, 0.0], [1.1, 1.05], [0.1, 1.0], [1.0, 0.05]])
XOR_Y = np.array([0, 0, 1, 1])
PM_X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
PM_Y = np.array([0, 0, 1, 1])


def _gini(y):
    if len(y) == 0:
        return 0.0
    p = np.mean(y)
    return 1 - p * p - (1 - p) * (1 - p)


def _node_walk_importance(trees, X, y, d):
    """Route the training rows through each tree and recount every node."""
    total = np.zeros(d)
    for t in trees:
        imp = np.zeros(d)
        n_root = len(y)

        def walk(node, rows):
            f = t.feature[node]
            if f < 0:
                return
            go_left = X[rows, f] <= t.threshold[node]
            L, R = rows[go_left], rows[~go_left]
            dec = _gini(y[rows]) - len(L) / len(rows) * _gini(y[L]) - len(R) / len(rows) * _gini(y[R])
            imp[f] += len(rows) / n_root * dec
            walk(t.left[node], L)
            walk(t.right[node], R)

        walk(0, np.arange(len(y)))
        total += imp
    total /= len(trees)
    return total / total.sum() if total.sum() > 0 else total


def test_single_class_single_leaf():
    t = fit_cart(np.arange(5.0)[:, None], np.ones(5, int))
    assert t.node_count == 1
    assert np.all(t.predict(np.arange(5.0)[:, None]) == 1)


def test_plus_minus_root_split():
    t = fit_cart(PM_X, PM_Y)
    assert t.feature[0] == 0 and t.threshold[0] == 0.0
    assert t.decrease[0] == pytest.approx(0.5, abs=1e-15)
    imp = gini_importance(t, 3)
    np.testing.assert_array_equal(imp.values, [1.0, 0.0, 0.0])
    assert imp.raw[0] == pytest.approx(0.5, abs=1e-15)


def test_xor_depths():
    assert (fit_cart(XOR_X, XOR_Y, max_depth=1).predict(XOR_X) == XOR_Y).mean() <= 0.75
    assert (fit_cart(XOR_X, XOR_Y, max_depth=2).predict(XOR_X) == XOR_Y).mean() == 1.0


def test_adaboost_combines_stumps_on_xor():
    m = fit_adaboost(XOR_X, XOR_Y, rounds=10)
    assert (m.predict(XOR_X) == XOR_Y).mean() == 1.0


def test_hand_built_tree_importance():
    # x0 <= 0.5 splits {0,0,1 | 1}; left child x1 <= 0.5 splits {0,0 | 1}
    X = np.array([[0, 0], [0, 0.2], [0, 1], [1, 0]], dtype=float)
    y = np.array([0, 0, 1, 1])
    g = lambda p: 2 * p * (1 - p)  # noqa: E731
    doc = {
        "weight": 4, "value": 0.5, "impurity": 0.5, "feature": 0, "threshold": 0.5,
        "decrease": 0.5 - 0.75 * g(1 / 3),
        "left": {
            "weight": 3, "value": 1 / 3, "impurity": g(1 / 3), "feature": 1, "threshold": 0.6,
            "decrease": g(1 / 3),
            "left": {"weight": 2, "value": 0.0, "impurity": 0.0},
            "right": {"weight": 1, "value": 1.0, "impurity": 0.0},
        },
        "right": {"weight": 1, "value": 1.0, "impurity": 0.0},
    }
    tree = Tree.from_dict(doc, 2)
    want = _node_walk_importance([tree], X, y, 2)
    np.testing.assert_allclose(gini_importance(tree, 2).values, want, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(tree.predict(X), y)


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.integers(10, 80), st.integers(1, 5), st.sampled_from([None, 1, 3]))
def test_importance_matches_node_walk(seed, n, d, depth):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, d)).astype(float)
    y = (rng.random(n) < 0.4).astype(int)
    m = fit_forest(X, y, seed=seed, n_trees=5, max_depth=depth, max_features="sqrt", bootstrap=False)
    want = _node_walk_importance(m.trees, X, y, d)
    np.testing.assert_allclose(gini_importance(m, d).values, want, rtol=0, atol=1e-12)


def test_depth_zero_forest_zero_importance(rng):
    X = rng.normal(size=(30, 3))
    y = (X[:, 0] > 0).astype(int)
    m = fit_forest(X, y, n_trees=5, max_depth=0)
    np.testing.assert_array_equal(gini_importance(m, 3).values, 0.0)


def test_noise_feature_low_importance(rng):
    X = rng.normal(size=(400, 2))
    y = (X[:, 0] > 0).astype(int)
    imp = gini_importance(fit_forest(X, y, seed=1, n_trees=50), 2).values
    assert imp[1] < 0.05


def test_degenerate_forest_equals_cart(rng):
    X = rng.normal(size=(60, 4))
    y = (X[:, 0] + X[:, 1] ** 2 > 0.5).astype(int)
    f = fit_forest(X, y, n_trees=1, max_features=None, bootstrap=False)
    probe = rng.normal(size=(100, 4))
    np.testing.assert_array_equal(f.predict(probe), fit_cart(X, y).predict(probe))


def test_forest_blobs_and_determinism(rng):
    X = np.r_[rng.normal(-2, 0.5, size=(100, 2)), rng.normal(2, 0.5, size=(100, 2))]
    y = np.r_[np.zeros(100, int), np.ones(100, int)]
    Xt = np.r_[rng.normal(-2, 0.5, size=(100, 2)), rng.normal(2, 0.5, size=(100, 2))]
    f = fit_forest(X, y, seed=3, n_trees=50)
    assert (f.predict(Xt) == y).mean() >= 0.95
    np.testing.assert_array_equal(f.predict(X), y)
    np.testing.assert_array_equal(fit_forest(X, y, seed=3, n_trees=50).predict(Xt), f.predict(Xt))


def test_forest_thread_independent(rng):
    from wdi_outbreak import parallel

    X = rng.normal(size=(200, 6))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    old = parallel.get_threads()
    try:
        parallel.set_threads(1)
        a = fit_forest(X, y, seed=5, n_trees=12)
        parallel.set_threads(4)
        b = fit_forest(X, y, seed=5, n_trees=12)
    finally:
        parallel.set_threads(old)
    for s, t in zip(a.trees, b.trees):
        np.testing.assert_array_equal(s.threshold, t.threshold)


def test_gnb_boundary():
    rng = np.random.default_rng(0)
    X = np.r_[rng.normal(-2, 1, 2000), rng.normal(2, 1, 2000)][:, None]
    y = np.r_[np.zeros(2000, int), np.ones(2000, int)]
    m = fit_gnb(X, y)
    grid = np.linspace(-1, 1, 2001)[:, None]
    boundary = grid[np.argmax(m.predict(grid) == 1), 0]
    assert abs(boundary) <= 0.1


def test_sgd_learns_linear_rule(rng):
    X = rng.normal(size=(500, 3))
    y = (X[:, 0] - X[:, 2] > 0).astype(int)
    m = fit_sgd_logistic(X, y, seed=1, epochs=30, learning_rate=0.1)
    assert (m.predict(X) == y).mean() > 0.95


def test_voting_unanimous_members():
    X = PM_X
    spec = ClassifierSpec("voting", {"members": ["cart", "cart", "cart"]})
    m = fit_arrays(spec, X, PM_Y)
    probe = np.linspace(-3, 3, 13)[:, None]
    np.testing.assert_array_equal(m.predict(probe), fit_cart(X, PM_Y).predict(probe))


def test_majority_vote_tie_to_zero():
    np.testing.assert_array_equal(majority_vote(np.array([[1, 0], [0, 0]])), [0, 0])
    np.testing.assert_array_equal(majority_vote(np.array([[1, 1], [1, 0], [0, 1]])), [1, 1])


def test_leaf_only_predicts_ones_and_empty_input():
    t = fit_cart(np.zeros((3, 2)), np.ones(3, int))
    np.testing.assert_array_equal(t.predict(np.zeros((4, 2))), 1)
    assert predict(t, np.zeros((0, 2))).shape == (0,)


def test_bagging_uses_all_features(rng):
    X = rng.normal(size=(80, 3))
    y = (X[:, 2] > 0).astype(int)
    m = fit_bagging(X, y, seed=0, n_estimators=4)
    assert all(t.feature[0] == 2 for t in m.trees)


@pytest.mark.parametrize("kind", ["cart", "forest", "bagging", "adaboost", "gnb", "sgd", "voting"])
def test_model_json_round_trip(kind, rng):
    X = rng.normal(size=(60, 3))
    y = (X[:, 0] + 0.3 * rng.normal(size=60) > 0).astype(int)
    spec = ClassifierSpec(kind, {"n_trees": 5} if kind == "forest" else {})
    m = fit_classifier(spec, LabeledDataset.from_arrays(X, y), seed=2)
    doc = json.loads(json.dumps(model_to_dict(m, [f"f{i}" for i in range(3)], spec)))
    probe = rng.normal(size=(40, 3))
    np.testing.assert_array_equal(model_from_dict(doc).predict(probe), m.predict(probe))


def test_spec_parse_and_errors():
    s = ClassifierSpec.parse("forest:n_trees=50,max_depth=4")
    assert s.kind == "forest" and s.params == {"n_trees": 50, "max_depth": 4}
    assert ClassifierSpec.parse("random_forest").kind == "forest"
    with pytest.raises(ValueError):
        ClassifierSpec.parse("svm")
    with pytest.raises(ValueError):
        ClassifierSpec("forest", {"bogus": 1})


def test_wrong_width_rejected():
    t = fit_cart(PM_X, PM_Y)
    with pytest.raises(ValueError):
        t.predict(np.zeros((2, 3)))
