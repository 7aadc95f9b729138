"""Synthetic country-year panels with planted outbreak signal.

Every feature mixes an idiosyncratic per-country linear trend with a share
of a few common latent trends (so columns are correlated and regression or
neighbour imputation has something to exploit), plus white noise. Columns
are standardised over the panel. Outbreak labels are Bernoulli draws with
probability ``sigmoid(sum_j effect_j * x_j + bias)`` over the informative
columns; ``bias`` is found by bisection so the realised positive rate hits
the requested imbalance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset, PanelTable


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    countries: int = 200
    years: int = 20
    features: int = 143
    informative: tuple[int, ...] = (0, 1, 2)
    effects: tuple[float, ...] = (5.0, 5.0, 5.0)
    imbalance: float = 0.1
    noise_std: float = 0.2
    missing_rate: float = 0.0
    mechanism: str = "MCAR"
    latent_rank: int = 5
    shared_fraction: float = 0.5
    start_year: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "informative", tuple(int(i) for i in self.informative))
        object.__setattr__(self, "effects", tuple(float(e) for e in self.effects))
        if len(self.informative) != len(self.effects):
            raise ValueError("one effect size per informative feature")
        if any(not 0 <= i < self.features for i in self.informative):
            raise ValueError("informative index outside the feature range")
        if len(set(self.informative)) != len(self.informative):
            raise ValueError("duplicate informative index")
        if not 0 < self.imbalance < 1:
            raise ValueError("imbalance must lie in (0, 1)")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not 0 <= self.missing_rate < 1:
            raise ValueError("missing_rate must lie in [0, 1)")
        if self.mechanism not in ("MCAR", "MAR"):
            raise ValueError("mechanism must be MCAR or MAR")
        if self.countries < 1 or self.years < 1 or self.features < 1:
            raise ValueError("panel dimensions must be positive")
        if not 0 <= self.shared_fraction <= 1:
            raise ValueError("shared_fraction must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    informative: tuple[int, ...]
    effects: tuple[float, ...]
    bias: float
    positive_rate: float
    bayes_accuracy: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    complete: PanelTable = field(repr=False)

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        """Label probability for rows of the (standardised, complete) feature matrix."""
        logit = X[:, list(self.informative)] @ np.array(self.effects) + self.bias
        return _sigmoid(logit)

    def to_dict(self) -> dict:
        return {
            "informative": list(self.informative),
            "effects": list(self.effects),
            "bias": self.bias,
            "positive_rate": self.positive_rate,
            "bayes_accuracy": self.bayes_accuracy,
        }


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def _raw_features(cfg: SynthConfig, countries: int, loadings: np.ndarray, seed_seq: np.random.SeedSequence):
    t = np.linspace(-1.0, 1.0, cfg.years) if cfg.years > 1 else np.zeros(1)
    d, r = cfg.features, cfg.latent_rank
    idio_w = np.sqrt(1.0 - cfg.shared_fraction)
    shared_w = np.sqrt(cfg.shared_fraction)
    blocks = []
    for child in seed_seq.spawn(countries):
        rng = np.random.default_rng(child)
        alpha = rng.normal(0.0, 1.0, d)
        beta = rng.normal(0.0, 0.5, d)
        mu = rng.normal(0.0, 1.0, r)
        slope = rng.normal(0.0, 0.5, r)
        idio = alpha[None, :] + t[:, None] * beta[None, :]
        shared = (mu[None, :] + t[:, None] * slope[None, :]) @ loadings.T
        noise = rng.normal(0.0, 1.0, (cfg.years, d)) * cfg.noise_std
        blocks.append(idio_w * idio + shared_w * shared + noise)
    return np.vstack(blocks)


def _calibrate(logit: np.ndarray, u: np.ndarray, target: float) -> float:
    def rate(b):
        return float(np.mean(u < _sigmoid(logit + b)))

    lo, hi = -60.0, 60.0
    if rate(lo) > target + 0.02 or rate(hi) < target - 0.02:
        raise CalibrationError(f"positive rate {target} unreachable")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate(mid) < target:
            lo = mid
        else:
            hi = mid
    b = hi if abs(rate(hi) - target) <= abs(rate(lo) - target) else lo
    if abs(rate(b) - target) > 0.02:
        raise CalibrationError(f"could not calibrate positive rate to {target}")
    return b


def generate_synthetic_panel(cfg: SynthConfig, seed: int = 0, bayes_sample_countries: int = 1000):
    """Return ``(dataset, truth)``; the dataset carries ``cfg.missing_rate``
    missingness, ``truth.complete`` the fully observed table."""
    root = np.random.SeedSequence(seed)
    load_ss, panel_ss, label_ss, bayes_ss, miss_ss = root.spawn(5)
    r = cfg.latent_rank
    loadings = np.random.default_rng(load_ss).normal(0.0, 1.0, (cfg.features, r)) / np.sqrt(max(r, 1))
    raw = _raw_features(cfg, cfg.countries, loadings, panel_ss)
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    X = (raw - mean) / std

    effects = np.array(cfg.effects)
    inf = list(cfg.informative)
    logit = X[:, inf] @ effects if inf else np.zeros(len(X))
    u = np.random.default_rng(label_ss).random(len(X))
    bias = _calibrate(logit, u, cfg.imbalance)
    y = (u < _sigmoid(logit + bias)).astype(np.int64)

    raw_b = _raw_features(cfg, bayes_sample_countries, loadings, bayes_ss)
    Xb = (raw_b - mean) / std
    pb = _sigmoid((Xb[:, inf] @ effects if inf else 0.0) + bias)
    bayes = float(np.mean(np.maximum(pb, 1.0 - pb)))

    keys = tuple(
        (f"C{c:03d}", cfg.start_year + t) for c in range(cfg.countries) for t in range(cfg.years)
    )
    names = tuple(f"x{j:03d}" for j in range(cfg.features))
    complete = PanelTable(keys, names, X, np.ones_like(X, dtype=bool))
    truth = GroundTruth(cfg.informative, cfg.effects, float(bias), float(y.mean()), bayes, mean, std, complete)
    table = complete
    if cfg.missing_rate > 0:
        table = inject_missingness(complete, cfg.mechanism, cfg.missing_rate, int(miss_ss.generate_state(1)[0]))
    return LabeledDataset(table, y), truth


def inject_missingness(table: PanelTable, mechanism: str = "MCAR", rate: float = 0.2, seed: int = 0) -> PanelTable:
    """Mask cells of a fully observed table.

    MCAR masks each cell with probability ``rate``. MAR leaves column 0
    intact and masks the other cells with probability proportional to
    ``sigmoid(z0)`` (z0 = standardised column 0), scaled so the average
    rate over those columns is ``rate``. The input table keeps the true
    values.
    """
    if not 0 <= rate < 1:
        raise ValueError("rate must lie in [0, 1)")
    if not table.fully_observed:
        raise ValueError("inject_missingness expects a fully observed table")
    if rate == 0:
        return table
    rng = np.random.default_rng(seed)
    n, d = table.values.shape
    u = rng.random((n, d))
    if mechanism == "MCAR":
        drop = u < rate
    elif mechanism == "MAR":
        x0 = table.values[:, 0]
        s = x0.std()
        z = (x0 - x0.mean()) / (s if s > 0 else 1.0)
        w = _sigmoid(z)
        p = np.clip(rate * w / w.mean(), 0.0, 1.0)
        drop = u < p[:, None]
        drop[:, 0] = False
    else:
        raise ValueError(f"unknown missingness mechanism {mechanism!r}")
    return table.with_values(table.values, table.mask & ~drop)
