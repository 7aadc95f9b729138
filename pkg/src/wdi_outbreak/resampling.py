"""SMOTE oversampling, Tomek-link undersampling and their composition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, PanelTable
from .neighbors import kneighbors

METHODS = ("none", "smote", "tomek", "smote-tomek")
SYNTHETIC_TAG = "__smote__"


class ResampleError(ValueError):
    pass


@dataclass(frozen=True)
class ResampleConfig:
    smote_k: int = 5
    target_ratio: float = 1.0
    apply_tomek: bool = True

    def __post_init__(self):
        if self.smote_k < 1:
            raise ValueError("smote_k must be >= 1")
        if not 0 < self.target_ratio <= 1:
            raise ValueError("target_ratio must lie in (0, 1]")


def minority_class(labels: np.ndarray) -> int:
    """The rarer class; on a tie the outbreak class (1)."""
    ones = int(np.sum(labels))
    return 0 if ones > len(labels) - ones else 1


def synthetic_count(minority: int, majority: int, target_ratio: float) -> int:
    # round away float noise such as 0.3 * 10 = 3.0000000000000004 before ceil
    return max(0, math.ceil(round(target_ratio * majority, 9)) - minority)


def smote(train: LabeledDataset, cfg: ResampleConfig = ResampleConfig(), seed: int = 0) -> LabeledDataset:
    """Append synthetic minority rows interpolated towards minority neighbours.

    Each synthetic row picks a minority base row uniformly, one of its
    ``min(smote_k, m - 1)`` nearest minority neighbours uniformly, and a
    uniform interpolation weight in [0, 1].
    """
    X = train.X
    y = train.y
    cls = minority_class(y)
    min_idx = np.flatnonzero(y == cls)
    m = len(min_idx)
    n_syn = synthetic_count(m, len(y) - m, cfg.target_ratio)
    if n_syn == 0:
        return train
    if m < 2:
        raise ResampleError(f"SMOTE needs at least 2 minority rows, found {m}")
    k = min(cfg.smote_k, m - 1)
    Xm = X[min_idx]
    nn = kneighbors(Xm, Xm, k, exclude=np.arange(m))
    rng = np.random.Generator(np.random.Philox(seed))
    base = rng.integers(0, m, size=n_syn)
    pick = rng.integers(0, k, size=n_syn)
    lam = rng.random(n_syn)
    partner = nn[base, pick]
    synth = Xm[base] + lam[:, None] * (Xm[partner] - Xm[base])
    keys = [(SYNTHETIC_TAG, i) for i in range(n_syn)]
    t = train.table
    table = PanelTable(
        t.row_keys + tuple(keys),
        t.feature_names,
        np.vstack([X, synth]),
        np.ones((len(y) + n_syn, t.n_features), dtype=bool),
    )
    return LabeledDataset(table, np.concatenate([y, np.full(n_syn, cls)]))


def tomek_pairs(X: np.ndarray, y: np.ndarray) -> list[tuple[int, int]]:
    """Cross-class mutual nearest-neighbour pairs (i < j)."""
    n = len(X)
    if n < 2:
        return []
    nn = kneighbors(X, X, 1, exclude=np.arange(n))[:, 0]
    return [
        (i, int(j))
        for i, j in enumerate(nn)
        if i < j and nn[j] == i and y[i] != y[j]
    ]


def tomek_links(train: LabeledDataset, minority: int | None = None) -> LabeledDataset:
    """Drop the majority member of every Tomek link, all in one pass.

    ``minority`` names the protected class; by default the rarer one.
    """
    X, y = train.X, train.y
    if minority is None:
        minority = minority_class(y)
    drop = sorted({i if y[i] != minority else j for i, j in tomek_pairs(X, y)})
    if not drop:
        return train
    keep = np.setdiff1d(np.arange(len(y)), drop)
    return train.take(keep)


def smote_tomek(train: LabeledDataset, cfg: ResampleConfig = ResampleConfig(), seed: int = 0) -> LabeledDataset:
    cls = minority_class(train.y)
    out = smote(train, cfg, seed)
    if cfg.apply_tomek:
        out = tomek_links(out, minority=cls)
    return out


def resample(train: LabeledDataset, method: str, cfg: ResampleConfig = ResampleConfig(), seed: int = 0) -> LabeledDataset:
    if method == "none":
        return train
    if method == "smote":
        return smote(train, cfg, seed)
    if method == "tomek":
        return tomek_links(train)
    if method == "smote-tomek":
        return smote_tomek(train, cfg, seed)
    raise ValueError(f"unknown resampling method {method!r}; choose from {', '.join(METHODS)}")
