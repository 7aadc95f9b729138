"""Missing-value imputers: k-nearest-neighbour, stochastic regression, random draw.

Each imputer is fitted on one table (normally the training split) and then
applied to any table with the same columns. Observed cells always pass
through untouched.

Random streams use numpy's Philox counter-based generator. Draws are taken
as one block and assigned to missing cells in a fixed order (columns in the
model's processing order, rows ascending), so the output depends only on the
seed and the missingness pattern. Normal deviates come from numpy's ziggurat
``standard_normal``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PanelTable

FORMAT = "wdi-outbreak/imputer"
VERSION = 1
METHODS = ("knn", "msreg", "random")


class ImputationError(ValueError):
    pass


def _stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _check_columns(model_names, table: PanelTable):
    if tuple(model_names) != table.feature_names:
        raise ImputationError("target columns do not match the fitted imputer")


# --------------------------------------------------------------------------
# KNN


@dataclass(frozen=True)
class DistanceSpec:
    k: int = 5
    metric: str = "euclidean"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.metric != "euclidean":
            raise ValueError(f"unsupported metric {self.metric!r}")


def partial_euclidean_distance(a, mask_a, b, mask_b) -> float:
    """Euclidean distance over coordinates observed in both rows.

    The sum of squares over the shared set S is rescaled by d/|S| so rows
    with little overlap are not artificially close.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("rows differ in length")
    shared = np.asarray(mask_a, bool) & np.asarray(mask_b, bool)
    s = int(shared.sum())
    if s == 0:
        raise ImputationError("no shared coordinates")
    diff = a[shared] - b[shared]
    return math.sqrt(len(a) / s * float(np.dot(diff, diff)))


@dataclass(frozen=True, eq=False)
class KNNImputerModel:
    train: PanelTable
    spec: DistanceSpec

    method = "knn"

    def transform(self, target: PanelTable, seed: int = 0) -> PanelTable:
        return knn_impute(self.train, target, self.spec)

    def to_dict(self) -> dict:
        t = self.train
        return {
            "format": FORMAT,
            "version": VERSION,
            "method": "knn",
            "k": self.spec.k,
            "metric": self.spec.metric,
            "feature_names": list(t.feature_names),
            "row_keys": [list(k) for k in t.row_keys],
            "values": [[float(v) if m else None for v, m in zip(r, rm)] for r, rm in zip(t.values, t.mask)],
        }


def fit_knn(train: PanelTable, spec: DistanceSpec = DistanceSpec()) -> KNNImputerModel:
    empty = [n for j, n in enumerate(train.feature_names) if not train.mask[:, j].any()]
    if empty:
        raise ImputationError(f"column {empty[0]!r} has no observed value in the fitting data")
    return KNNImputerModel(train, spec)


def _masked_sqdist(Q, MQ, R, MR):
    """Approximate shared-coordinate squared distance sums and overlap counts."""
    q = np.where(MQ, Q, 0.0)
    r = np.where(MR, R, 0.0)
    mq = MQ.astype(float)
    mr = MR.astype(float)
    s = (q * q) @ mr.T + mq @ (r * r).T - 2.0 * (q @ r.T)
    cnt = mq @ mr.T
    scale = (q * q) @ mr.T + mq @ (r * r).T
    return np.maximum(s, 0.0), cnt, scale


def knn_impute(train: PanelTable, target: PanelTable, spec: DistanceSpec = DistanceSpec()) -> PanelTable:
    """Fill each missing cell with the mean of its k nearest training rows.

    Neighbours for column c are drawn only from training rows observing c,
    ranked by :func:`partial_euclidean_distance` with ties going to the lower
    row index. A target row whose key also occurs in ``train`` never counts
    itself as a neighbour.
    """
    fit_knn(train, spec)
    if target.feature_names != train.feature_names:
        raise ImputationError("target columns do not match the training table")
    if target.fully_observed:
        return target
    d = train.n_features
    TV = np.where(train.mask, train.values, 0.0)
    TM = train.mask
    key_index = {key: i for i, key in enumerate(train.row_keys)}
    out = target.values.copy()
    need = np.flatnonzero(~target.mask.all(axis=1))
    for start in range(0, len(need), 256):
        rows = need[start : start + 256]
        Q = np.where(target.mask[rows], target.values[rows], 0.0)
        MQ = target.mask[rows]
        s, cnt, scale = _masked_sqdist(Q, MQ, TV, TM)
        with np.errstate(divide="ignore", invalid="ignore"):
            d2 = np.where(cnt > 0, s * d / np.maximum(cnt, 1), np.inf)
            tol = np.where(cnt > 0, 1e-9 * scale * d / np.maximum(cnt, 1), 0.0) + 1e-300
        for li, row in enumerate(rows):
            self_idx = key_index.get(target.row_keys[row], -1)
            if self_idx >= 0:
                d2[li, self_idx] = np.inf
        for c in range(d):
            local = np.flatnonzero(~MQ[:, c])
            if len(local) == 0:
                continue
            cand = np.flatnonzero(TM[:, c])
            sub = d2[np.ix_(local, cand)]
            for li, drow, trow in zip(local, sub, tol[np.ix_(local, cand)]):
                chosen = _select(drow, trow, spec.k, cand, Q[li], MQ[li], TV, TM)
                if chosen is None:
                    raise ImputationError(
                        f"no eligible neighbour for column {train.feature_names[c]!r} "
                        f"in row {target.row_keys[rows[li]]}"
                    )
                out[rows[li], c] = TV[chosen, c].mean()
    return target.with_values(out, np.ones_like(target.mask))


def _select(drow, tol, k, cand, q, mq, TV, TM):
    finite = np.isfinite(drow)
    nf = int(finite.sum())
    if nf == 0:
        return None
    if nf <= k:
        return cand[finite]
    part = np.argpartition(drow, k)
    kth = drow[part[:k]].max()
    nxt = drow[part[k:]].min()
    if nxt - kth > 2 * tol.max():
        return cand[part[:k]]
    # near-tie at the k-th place: recompute exactly and break ties by index
    pool = np.flatnonzero(drow <= kth + 2 * tol.max())
    exact = np.array([_exact_partial_sq(q, mq, TV[cand[j]], TM[cand[j]]) for j in pool])
    order = np.lexsort((cand[pool], exact))
    return cand[pool[order[:k]]]


def _exact_partial_sq(a, ma, b, mb):
    shared = ma & mb
    diff = a[shared] - b[shared]
    return len(a) / shared.sum() * float(np.dot(diff, diff))


# --------------------------------------------------------------------------
# Stochastic multiple regression


@dataclass(frozen=True)
class ColumnRegression:
    predictors: tuple[int, ...]
    coef: np.ndarray  # intercept first
    sigma: float
    fallback: str = "ols"  # "ols" | "ridge" | "mean"


@dataclass(frozen=True, eq=False)
class RegressionImputerModel:
    feature_names: tuple[str, ...]
    means: np.ndarray
    order: tuple[int, ...]
    columns: dict[int, ColumnRegression]

    method = "msreg"

    def transform(self, target: PanelTable, seed: int = 0) -> PanelTable:
        return msreg_impute(self, target, seed)

    def predict_column(self, W: np.ndarray, j: int) -> np.ndarray:
        reg = self.columns[j]
        return reg.coef[0] + W[:, list(reg.predictors)] @ reg.coef[1:]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "method": "msreg",
            "feature_names": list(self.feature_names),
            "means": self.means.tolist(),
            "order": list(self.order),
            "columns": [
                {
                    "column": j,
                    "predictors": list(r.predictors),
                    "coef": r.coef.tolist(),
                    "sigma": r.sigma,
                    "fallback": r.fallback,
                }
                for j, r in sorted(self.columns.items())
            ],
        }


def _ols(Xd: np.ndarray, y: np.ndarray):
    coef, _, rank, _ = np.linalg.lstsq(Xd, y, rcond=None)
    if rank == Xd.shape[1]:
        return coef, "ols"
    gram = Xd.T @ Xd
    p = Xd.shape[1]
    lam = 1e-8 * np.trace(gram) / p
    if lam == 0.0:
        lam = 1e-8
    return np.linalg.solve(gram + lam * np.eye(p), Xd.T @ y), "ridge"


def msreg_fit(train: PanelTable) -> RegressionImputerModel:
    """Regress each column on all the others.

    Single sweep: columns are visited from least to most missing; missing
    predictor cells start at the column mean and are replaced by the
    regression prediction once their own column has been fitted. Columns
    with fewer than ``predictors + 2`` observed rows fall back to a mean
    model whose noise scale is the sample standard deviation.
    """
    n, d = train.values.shape
    if d < 2:
        raise ImputationError("stochastic regression imputation needs at least 2 columns")
    mask = train.mask
    obs_count = mask.sum(axis=0)
    if (obs_count == 0).any():
        j = int(np.flatnonzero(obs_count == 0)[0])
        raise ImputationError(f"column {train.feature_names[j]!r} has no observed value in the fitting data")
    means = np.array([train.values[mask[:, j], j].mean() for j in range(d)])
    W = np.where(mask, train.values, means)
    order = tuple(sorted(range(d), key=lambda j: (int(n - obs_count[j]), j)))
    columns: dict[int, ColumnRegression] = {}
    for j in order:
        obs = mask[:, j]
        preds = tuple(i for i in range(d) if i != j)
        p = len(preds)
        y = train.values[obs, j]
        n_obs = len(y)
        if n_obs < p + 2:
            sigma = float(y.std(ddof=1)) if n_obs > 1 else 0.0
            coef = np.zeros(p + 1)
            coef[0] = y.mean()
            reg = ColumnRegression(preds, coef, sigma, "mean")
        else:
            Xd = np.hstack([np.ones((n_obs, 1)), W[obs][:, list(preds)]])
            coef, how = _ols(Xd, y)
            resid = y - Xd @ coef
            rss = float(resid @ resid)
            sigma = math.sqrt(max(rss / (n_obs - p - 1), 0.0))
            reg = ColumnRegression(preds, coef, sigma, how)
        columns[j] = reg
        if (~obs).any():
            W[~obs, j] = reg.coef[0] + W[~obs][:, list(preds)] @ reg.coef[1:]
    return RegressionImputerModel(train.feature_names, means, order, columns)


def msreg_impute(model: RegressionImputerModel, target: PanelTable, seed: int = 0) -> PanelTable:
    """Impute each missing cell as regression prediction + sigma * N(0, 1).

    Predictors are the working matrix of the fitting sweep: observed values,
    noise-free predictions for already-visited columns, column means
    otherwise. Each missing cell gets its own standard-normal deviate.
    """
    _check_columns(model.feature_names, target)
    if target.fully_observed:
        return target
    mask = target.mask
    W = np.where(mask, target.values, model.means)
    out = target.values.copy()
    n_missing = int((~mask).sum())
    z = _stream(seed).standard_normal(n_missing)
    pos = 0
    for j in model.order:
        miss = np.flatnonzero(~mask[:, j])
        if len(miss) == 0:
            continue
        pred = model.predict_column(W[miss], j)
        out[miss, j] = pred + model.columns[j].sigma * z[pos : pos + len(miss)]
        pos += len(miss)
        W[miss, j] = pred
    return target.with_values(out, np.ones_like(mask))


# --------------------------------------------------------------------------
# Random draw


@dataclass(frozen=True, eq=False)
class RandomImputerModel:
    feature_names: tuple[str, ...]
    observed: tuple[np.ndarray, ...]

    method = "random"

    def transform(self, target: PanelTable, seed: int = 0) -> PanelTable:
        return random_impute(self, target, seed)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "method": "random",
            "feature_names": list(self.feature_names),
            "observed": [v.tolist() for v in self.observed],
        }


def random_fit(train: PanelTable) -> RandomImputerModel:
    observed = []
    for j, name in enumerate(train.feature_names):
        vals = train.values[train.mask[:, j], j]
        if len(vals) == 0:
            raise ImputationError(f"column {name!r} has no observed value in the fitting data")
        observed.append(vals.copy())
    return RandomImputerModel(train.feature_names, tuple(observed))


def random_impute(model: RandomImputerModel, target: PanelTable, seed: int = 0) -> PanelTable:
    """Replace each missing cell by a uniform draw from the column's observed values."""
    _check_columns(model.feature_names, target)
    if target.fully_observed:
        return target
    rng = _stream(seed)
    out = target.values.copy()
    for j, pool in enumerate(model.observed):
        miss = np.flatnonzero(~target.mask[:, j])
        if len(miss):
            out[miss, j] = pool[rng.integers(0, len(pool), size=len(miss))]
    return target.with_values(out, np.ones_like(target.mask))


# --------------------------------------------------------------------------


def fit_imputer(method: str, train: PanelTable, k: int = 5):
    if method == "knn":
        return fit_knn(train, DistanceSpec(k=k))
    if method == "msreg":
        return msreg_fit(train)
    if method == "random":
        return random_fit(train)
    raise ValueError(f"unknown imputer {method!r}; choose from {', '.join(METHODS)}")


def imputer_from_dict(doc: dict):
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ImputationError("not a version-1 imputer document")
    names = tuple(doc["feature_names"])
    method = doc["method"]
    if method == "knn":
        vals = np.array([[np.nan if v is None else v for v in r] for r in doc["values"]], dtype=float).reshape(-1, len(names))
        table = PanelTable(tuple(tuple(k) for k in doc["row_keys"]), names, vals, ~np.isnan(vals))
        return KNNImputerModel(table, DistanceSpec(doc["k"], doc["metric"]))
    if method == "msreg":
        cols = {
            c["column"]: ColumnRegression(tuple(c["predictors"]), np.array(c["coef"], dtype=float), float(c["sigma"]), c["fallback"])
            for c in doc["columns"]
        }
        return RegressionImputerModel(names, np.array(doc["means"], dtype=float), tuple(doc["order"]), cols)
    if method == "random":
        return RandomImputerModel(names, tuple(np.array(v, dtype=float) for v in doc["observed"]))
    raise ImputationError(f"unknown imputer method {method!r}")
