"""Tree ensembles: random forest, bagging, discrete AdaBoost, hard voting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..parallel import ordered_map
from .tree import Tree, _check_rows, grow_tree, rank_encode


def child_seeds(seed: int, n: int) -> list[int]:
    """Independent per-member seeds derived from a master seed."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(n)]


def majority_vote(votes: np.ndarray) -> np.ndarray:
    """Column-wise majority of a (members, rows) 0/1 array; ties go to 0."""
    ones = votes.sum(axis=0)
    return (2 * ones > votes.shape[0]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[Tree, ...]
    seeds: tuple[int, ...]
    max_features: object
    n_features: int
    kind: str = "forest"

    def predict(self, X) -> np.ndarray:
        X = _check_rows(X, self.n_features)
        if len(X) == 0:
            return np.empty(0, dtype=np.int64)
        return majority_vote(np.array([t.predict(X) for t in self.trees]))


def _bagged_trees(X, y, n_trees, seed, max_depth, min_samples_split, max_features, bootstrap):
    n = len(y)
    seeds = child_seeds(seed, n_trees)
    R, V = rank_encode(X)

    def one(s):
        rng = np.random.default_rng(s)
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            Xb, yb, Rb = X[rows], y[rows], np.ascontiguousarray(R[:, rows])
        else:
            Xb, yb, Rb = X, y, R
        return grow_tree(Xb, yb, max_depth=max_depth, min_samples_split=min_samples_split,
                         max_features=max_features, rng=rng, ranks=(Rb, V))

    return tuple(ordered_map(one, seeds)), tuple(seeds)


def fit_forest(X, y, seed=0, n_trees=100, max_depth=None, min_samples_split=2,
               max_features="sqrt", bootstrap=True) -> ForestModel:
    """Random forest: bootstrap samples plus a fresh feature subset at each node."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot fit on an empty training set")
    trees, seeds = _bagged_trees(X, y, n_trees, seed, max_depth, min_samples_split, max_features, bootstrap)
    return ForestModel(trees, seeds, max_features, X.shape[1])


def fit_bagging(X, y, seed=0, n_estimators=10, max_depth=None, min_samples_split=2) -> ForestModel:
    """Bootstrap-aggregated CART; every split sees all features."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    trees, seeds = _bagged_trees(X, y, n_estimators, seed, max_depth, min_samples_split, None, True)
    return ForestModel(trees, seeds, "all", X.shape[1], kind="bagging")


@dataclass(frozen=True, eq=False)
class AdaBoostModel:
    stumps: tuple[Tree, ...]
    alphas: np.ndarray
    n_features: int

    def decision_function(self, X) -> np.ndarray:
        X = _check_rows(X, self.n_features)
        score = np.zeros(len(X))
        for a, s in zip(self.alphas, self.stumps):
            score += a * (2 * s.predict(X) - 1)
        return score

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)

    def staged_predict(self, X):
        X = _check_rows(X, self.n_features)
        score = np.zeros(len(X))
        for a, s in zip(self.alphas, self.stumps):
            score += a * (2 * s.predict(X) - 1)
            yield (score > 0).astype(np.int64)


def fit_adaboost(X, y, seed=0, rounds=50, stump_depth=1) -> AdaBoostModel:
    """Discrete AdaBoost over shallow weighted CART learners.

    alpha_m = 0.5 * ln((1 - err) / err) with err clamped to
    [1e-10, 1 - 1e-10]. Boosting stops early once a learner is perfect or
    no better than chance. ``seed`` is accepted for interface symmetry; the
    procedure is deterministic.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    w = np.full(n, 1.0 / n)
    sign = 2 * y - 1
    stumps, alphas = [], []
    for _ in range(rounds):
        stump = grow_tree(X, y, sample_weight=w, max_depth=stump_depth)
        pred = stump.predict(X)
        miss = pred != y
        err = float(w[miss].sum() / w.sum())
        if err >= 0.5 and stumps:
            break
        err = min(max(err, 1e-10), 1 - 1e-10)
        alpha = 0.5 * math.log((1 - err) / err)
        stumps.append(stump)
        alphas.append(alpha)
        if err <= 1e-10 or alpha <= 0:
            break
        w = w * np.exp(-alpha * sign * (2 * pred - 1))
        w /= w.sum()
    return AdaBoostModel(tuple(stumps), np.array(alphas), X.shape[1])


@dataclass(frozen=True, eq=False)
class VotingModel:
    members: tuple
    n_features: int

    def predict(self, X) -> np.ndarray:
        X = _check_rows(X, self.n_features)
        if len(X) == 0:
            return np.empty(0, dtype=np.int64)
        return majority_vote(np.array([m.predict(X) for m in self.members]))
