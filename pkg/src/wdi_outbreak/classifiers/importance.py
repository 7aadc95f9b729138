"""Mean-decrease-in-Gini feature importance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import ForestModel
from .tree import Tree


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    values: np.ndarray
    raw: np.ndarray  # before normalisation

    def ranking(self) -> np.ndarray:
        """Feature indices, most important first (ties by lower index)."""
        return np.lexsort((np.arange(len(self.values)), -self.values))


def _trees(model):
    if isinstance(model, Tree):
        return (model,)
    if isinstance(model, ForestModel):
        return model.trees
    raise TypeError(f"Gini importance needs a tree or tree ensemble, got {type(model).__name__}")


def tree_importance(tree: Tree, feature_count: int) -> np.ndarray:
    """Sum of p(t) * decrease(t) over the split nodes of one tree, per feature."""
    imp = np.zeros(feature_count)
    split = tree.feature >= 0
    np.add.at(imp, tree.feature[split], (tree.fraction * tree.decrease)[split])
    return imp


def gini_importance(model, feature_count: int) -> ImportanceVector:
    """Average the per-tree sums over all trees, then normalise to sum 1.

    An ensemble with no split at all yields the zero vector.
    """
    trees = _trees(model)
    raw = sum(tree_importance(t, feature_count) for t in trees) / len(trees)
    total = raw.sum()
    values = raw / total if total > 0 else np.zeros(feature_count)
    return ImportanceVector(values, raw)
