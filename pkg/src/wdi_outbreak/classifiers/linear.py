"""Gaussian naive Bayes and SGD-trained logistic regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import _check_rows


@dataclass(frozen=True, eq=False)
class GaussianNBModel:
    log_prior: np.ndarray  # (2,), -inf for an absent class
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d)

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = _check_rows(X, self.n_features)
        out = np.empty((len(X), 2))
        for c in (0, 1):
            if not np.isfinite(self.log_prior[c]):
                out[:, c] = -np.inf
                continue
            var = self.variances[c]
            out[:, c] = (
                self.log_prior[c]
                - 0.5 * np.sum(np.log(2 * np.pi * var))
                - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
            )
        return out

    def predict(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return (jll[:, 1] > jll[:, 0]).astype(np.int64)


def fit_gnb(X, y, var_smoothing=1e-9) -> GaussianNBModel:
    """Per-class Gaussian likelihoods; variances get ``var_smoothing`` times
    the largest feature variance added. A class absent from ``y`` is never
    predicted."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot fit on an empty training set")
    d = X.shape[1]
    eps = var_smoothing * float(np.max(X.var(axis=0))) if d else 0.0
    if eps == 0.0:
        eps = var_smoothing
    log_prior = np.full(2, -np.inf)
    means = np.zeros((2, d))
    variances = np.ones((2, d))
    for c in (0, 1):
        Xc = X[y == c]
        if len(Xc) == 0:
            continue
        log_prior[c] = np.log(len(Xc) / len(y))
        means[c] = Xc.mean(axis=0)
        variances[c] = Xc.var(axis=0) + eps
    return GaussianNBModel(log_prior, means, variances)


@dataclass(frozen=True, eq=False)
class LogisticModel:
    coef: np.ndarray
    intercept: float

    @property
    def n_features(self) -> int:
        return len(self.coef)

    def decision_function(self, X) -> np.ndarray:
        X = _check_rows(X, self.n_features)
        return X @ self.coef + self.intercept

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def fit_sgd_logistic(X, y, seed=0, learning_rate=0.01, epochs=20, l2=1e-4, batch_size=32) -> LogisticModel:
    """Mini-batch SGD on the mean logistic loss plus ``l2/2 * |w|^2``.

    Rows are reshuffled each epoch from a generator seeded by ``seed``; the
    intercept is not penalised.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start : start + batch_size]
            xb = X[rows]
            resid = _sigmoid(xb @ w + b) - y[rows]
            w -= learning_rate * (xb.T @ resid / len(rows) + l2 * w)
            b -= learning_rate * float(resid.mean())
    return LogisticModel(w, b)
