"""Per-feature scalers fitted on training data.

``logdev`` is the signed log of the robust deviation,
``sign(x - median) * ln(1 + |x - median| / IQR)``. Any zero spread is
replaced by 1 so constant features map to a constant instead of NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PanelTable

KINDS = ("robust", "minmax", "standard", "logdev")
FORMAT = "wdi-outbreak/scaler"
VERSION = 1


class ScalingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalerParams:
    kind: str
    feature_names: tuple[str, ...]
    center: np.ndarray  # median, min or mean
    spread: np.ndarray  # IQR, max - min or std (raw, may be zero)
    quantile_range: tuple[float, float] = (0.25, 0.75)

    def divisor(self) -> np.ndarray:
        return np.where(self.spread > 0, self.spread, 1.0)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "center": self.center.tolist(),
            "spread": self.spread.tolist(),
            "quantile_range": list(self.quantile_range),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalerParams":
        if doc.get("format") != FORMAT or doc.get("version") != VERSION:
            raise ScalingError("not a version-1 scaler document")
        return cls(
            doc["kind"],
            tuple(doc["feature_names"]),
            np.array(doc["center"], dtype=float),
            np.array(doc["spread"], dtype=float),
            tuple(doc["quantile_range"]),
        )


def fit_scaler(train: PanelTable, kind: str = "robust", quantile_range=(0.25, 0.75)) -> ScalerParams:
    if kind not in KINDS:
        raise ScalingError(f"unknown scaler {kind!r}; choose from {', '.join(KINDS)}")
    lo, hi = quantile_range
    if not 0 < lo < hi < 1:
        raise ScalingError("quantile range must satisfy 0 < lo < hi < 1")
    if train.n_rows == 0:
        raise ScalingError("cannot fit a scaler on an empty table")
    X = train.dense()
    if kind in ("robust", "logdev"):
        # numpy's default "linear" method interpolates between order statistics
        q_lo, med, q_hi = np.quantile(X, [lo, 0.5, hi], axis=0)
        center, spread = med, q_hi - q_lo
    elif kind == "minmax":
        center, spread = X.min(axis=0), X.max(axis=0) - X.min(axis=0)
    else:
        center, spread = X.mean(axis=0), X.std(axis=0)
    return ScalerParams(kind, train.feature_names, center, np.maximum(spread, 0.0), (lo, hi))


def scale_matrix(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    dev = X - params.center
    div = params.divisor()
    if params.kind == "logdev":
        return np.sign(dev) * np.log1p(np.abs(dev) / div)
    return dev / div


def apply_scaler(params: ScalerParams, table: PanelTable) -> PanelTable:
    if table.feature_names != params.feature_names:
        raise ScalingError("table features do not match the fitted scaler")
    return table.with_values(scale_matrix(params, table.dense()))
