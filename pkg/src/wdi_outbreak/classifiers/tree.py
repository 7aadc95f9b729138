"""CART with Gini impurity, stored as flat node arrays."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernel import apply_tree, grow

MIN_GAIN = 1e-12


@dataclass(frozen=True, eq=False)
class Tree:
    """A fitted binary tree.

    Node ``t`` is a leaf when ``feature[t] == -1``. ``weight[t]`` is the
    (weighted) number of training samples reaching ``t``; ``decrease[t]`` is
    the Gini decrease of its split, i(t) - (n_L/n_t) i(L) - (n_R/n_t) i(R).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    value: np.ndarray  # weighted fraction of class 1 among samples at the node
    impurity: np.ndarray
    decrease: np.ndarray
    n_features: int

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def fraction(self) -> np.ndarray:
        """p(t): share of the root's samples that reach each node."""
        return self.weight / self.weight[0]

    def leaf_label(self) -> np.ndarray:
        return (self.value > 0.5).astype(np.int64)

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X) -> np.ndarray:
        X = _check_rows(X, self.n_features)
        if len(X) == 0:
            return np.empty(0, dtype=np.int64)
        return self.leaf_label()[self.apply(X)]

    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=int)
        for t in range(self.node_count):
            if self.feature[t] >= 0:
                depth[self.left[t]] = depth[self.right[t]] = depth[t] + 1
        return int(depth.max())

    def to_dict(self, node: int = 0) -> dict:
        """Nested-record form of the subtree rooted at ``node``."""
        rec = {
            "fraction": float(self.fraction[node]),
            "weight": float(self.weight[node]),
            "value": float(self.value[node]),
            "impurity": float(self.impurity[node]),
        }
        if self.feature[node] < 0:
            rec["label"] = int(self.value[node] > 0.5)
            return rec
        rec.update(
            feature=int(self.feature[node]),
            threshold=float(self.threshold[node]),
            decrease=float(self.decrease[node]),
            left=self.to_dict(int(self.left[node])),
            right=self.to_dict(int(self.right[node])),
        )
        return rec

    @classmethod
    def from_dict(cls, doc: dict, n_features: int) -> "Tree":
        b = _Builder()

        def walk(rec):
            t = b.add(rec["weight"], rec["value"], rec["impurity"])
            if "feature" in rec:
                lt = walk(rec["left"])
                rt = walk(rec["right"])
                b.split(t, rec["feature"], rec["threshold"], rec["decrease"], lt, rt)
            return t

        walk(doc)
        return b.finish(n_features)


def _check_rows(X, n_features):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, n_features)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected rows with {n_features} features, got shape {X.shape}")
    return X


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.weight, self.value, self.impurity, self.decrease = [], [], [], []

    def add(self, weight, value, impurity):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.weight.append(weight)
        self.value.append(value)
        self.impurity.append(impurity)
        self.decrease.append(0.0)
        return len(self.feature) - 1

    def split(self, t, feature, threshold, decrease, left, right):
        self.feature[t] = feature
        self.threshold[t] = threshold
        self.decrease[t] = decrease
        self.left[t] = left
        self.right[t] = right

    def finish(self, n_features):
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=float),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.weight, dtype=float),
            np.array(self.value, dtype=float),
            np.array(self.impurity, dtype=float),
            np.array(self.decrease, dtype=float),
            n_features,
        )


def resolve_max_features(policy, d: int) -> int:
    if policy is None or policy == "all":
        return d
    if policy == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if policy == "log2":
        return max(1, math.ceil(math.log2(d))) if d > 1 else 1
    m = int(policy)
    if not 1 <= m:
        raise ValueError("max_features must be positive")
    return min(m, d)


def rank_encode(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense ranks ``R[f, i]`` of every column and rank-to-value table ``V[f, r]``."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    R = np.empty((d, n), dtype=np.int64)
    V = np.full((d, max(n, 1)), np.nan)
    for j in range(d):
        u, inv = np.unique(X[:, j], return_inverse=True)
        R[j] = inv
        V[j, : len(u)] = u
    return R, V


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray | None = None,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    max_features=None,
    rng: np.random.Generator | None = None,
    ranks: tuple[np.ndarray, np.ndarray] | None = None,
) -> Tree:
    """Greedy depth-first CART growth.

    A node becomes a leaf at ``max_depth``, below ``min_samples_split`` rows,
    when pure, or when no split decreases impurity. With ``max_features``
    below the feature count a fresh uniform subset is drawn at every node
    from ``rng``. ``ranks`` may carry a precomputed :func:`rank_encode` of
    ``X`` (bootstrap callers pass ``R[:, rows]``).
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on an empty training set")
    w = np.ones(n) if sample_weight is None else np.ascontiguousarray(sample_weight, dtype=float)
    m = resolve_max_features(max_features, d)
    seed = 0
    if m < d:
        if rng is None:
            raise ValueError("feature subsampling needs a random generator")
        seed = int(rng.integers(0, 2**63 - 1))
    unit = sample_weight is None
    if unit:
        R, V = ranks if ranks is not None else rank_encode(X)
    else:
        R, V = np.zeros((1, 1), dtype=np.int64), np.zeros((1, 1))
    arrays = grow(
        X, y, w,
        -1 if max_depth is None else int(max_depth),
        int(min_samples_split), m, np.uint64(seed), MIN_GAIN,
        R, V, unit,
    )
    return Tree(*arrays, n_features=d)
