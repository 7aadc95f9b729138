"""Classifier specifications, the fitting dispatcher and JSON model documents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..data import LabeledDataset
from .ensemble import (
    AdaBoostModel,
    ForestModel,
    VotingModel,
    child_seeds,
    fit_adaboost,
    fit_bagging,
    fit_forest,
)
from .linear import GaussianNBModel, LogisticModel, fit_gnb, fit_sgd_logistic
from .tree import Tree, grow_tree

KINDS = ("cart", "forest", "bagging", "adaboost", "gnb", "sgd", "voting")
ALIASES = {"sgd_logistic": "sgd", "random_forest": "forest", "tree": "cart"}
FORMAT = "wdi-outbreak/model"
VERSION = 1

DEFAULTS: dict[str, dict[str, Any]] = {
    "cart": {"max_depth": None, "min_samples_split": 2},
    "forest": {"n_trees": 100, "max_depth": None, "min_samples_split": 2, "max_features": "sqrt", "bootstrap": True},
    "bagging": {"n_estimators": 10, "max_depth": None, "min_samples_split": 2},
    "adaboost": {"rounds": 50, "stump_depth": 1},
    "gnb": {"var_smoothing": 1e-9},
    "sgd": {"learning_rate": 0.01, "epochs": 20, "l2": 1e-4, "batch_size": 32},
    "voting": {"members": ({"kind": "cart"}, {"kind": "gnb"}, {"kind": "sgd"})},
}
# single-class training data is only tolerated by these
ONE_CLASS_OK = ("cart", "gnb")


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ClassifierError(f"unknown classifier {self.kind!r}; choose from {', '.join(KINDS)}")
        unknown = set(self.params) - set(DEFAULTS[kind])
        if unknown:
            raise ClassifierError(f"unknown {kind} parameters: {sorted(unknown)}")
        for name, value in self.params.items():
            if name in ("max_depth",) and value is not None and value < 0:
                raise ClassifierError(f"{name} must be >= 0")
            if isinstance(value, (int, float)) and not isinstance(value, bool) and name not in ("max_depth",):
                if value <= 0:
                    raise ClassifierError(f"{name} must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", dict(self.params))

    def resolved(self) -> dict[str, Any]:
        return {**DEFAULTS[self.kind], **self.params}

    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={_short(v)}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params)}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ClassifierSpec":
        params = dict(doc.get("params", {}))
        extra = {k: v for k, v in doc.items() if k not in ("kind", "params")}
        params.update(extra)
        return cls(doc["kind"], params)

    @classmethod
    def parse(cls, text: str) -> "ClassifierSpec":
        """``forest`` or ``forest:n_trees=50,max_depth=8``."""
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, _, raw = item.partition("=")
            params[key.strip()] = _parse_value(raw.strip())
        return cls(kind.strip(), params)


def _short(v):
    if isinstance(v, (list, tuple)):
        return "+".join(m["kind"] if isinstance(m, Mapping) else str(m) for m in v)
    return v


def _parse_value(raw: str):
    if raw.lower() in ("none", "null"):
        return None
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    return raw


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: list(o) if isinstance(o, tuple) else str(o)))


def fit_classifier(spec: ClassifierSpec, train: LabeledDataset, seed: int = 0):
    return fit_arrays(spec, train.X, train.y, seed)


def fit_arrays(spec: ClassifierSpec, X, y, seed: int = 0):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ClassifierError("empty training set")
    if spec.kind not in ONE_CLASS_OK and len(np.unique(y)) < 2:
        raise ClassifierError(f"{spec.kind} needs both classes in the training data")
    p = spec.resolved()
    if spec.kind == "cart":
        return grow_tree(X, y, max_depth=p["max_depth"], min_samples_split=p["min_samples_split"])
    if spec.kind == "forest":
        return fit_forest(X, y, seed, **p)
    if spec.kind == "bagging":
        return fit_bagging(X, y, seed, **p)
    if spec.kind == "adaboost":
        return fit_adaboost(X, y, seed, **p)
    if spec.kind == "gnb":
        return fit_gnb(X, y, **p)
    if spec.kind == "sgd":
        return fit_sgd_logistic(X, y, seed, **p)
    members = [
        m if isinstance(m, ClassifierSpec) else ClassifierSpec.parse(m) if isinstance(m, str) else ClassifierSpec.from_dict(m)
        for m in p["members"]
    ]
    seeds = child_seeds(seed, len(members))
    return VotingModel(tuple(fit_arrays(m, X, y, s) for m, s in zip(members, seeds)), X.shape[1])


def predict(model, rows) -> np.ndarray:
    """Labels in {0, 1} for a fully observed feature matrix."""
    return model.predict(rows)


# --------------------------------------------------------------------------
# JSON documents


def _model_body(model) -> dict:
    if isinstance(model, Tree):
        return {"kind": "cart", "n_features": model.n_features, "tree": model.to_dict()}
    if isinstance(model, ForestModel):
        return {
            "kind": model.kind,
            "n_features": model.n_features,
            "max_features": model.max_features,
            "seeds": list(model.seeds),
            "trees": [t.to_dict() for t in model.trees],
        }
    if isinstance(model, AdaBoostModel):
        return {
            "kind": "adaboost",
            "n_features": model.n_features,
            "alphas": model.alphas.tolist(),
            "stumps": [t.to_dict() for t in model.stumps],
        }
    if isinstance(model, GaussianNBModel):
        return {
            "kind": "gnb",
            "log_prior": [None if not np.isfinite(v) else float(v) for v in model.log_prior],
            "means": model.means.tolist(),
            "variances": model.variances.tolist(),
        }
    if isinstance(model, LogisticModel):
        return {"kind": "sgd", "coef": model.coef.tolist(), "intercept": model.intercept}
    if isinstance(model, VotingModel):
        return {"kind": "voting", "n_features": model.n_features, "members": [_model_body(m) for m in model.members]}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_to_dict(model, feature_names=None, spec: ClassifierSpec | None = None) -> dict:
    doc = {"format": FORMAT, "version": VERSION}
    if spec is not None:
        doc["spec"] = spec.to_dict()
    if feature_names is not None:
        doc["feature_names"] = list(feature_names)
    doc["model"] = _model_body(model)
    return doc


def _model_from_body(body: dict):
    kind = body["kind"]
    if kind == "cart":
        return Tree.from_dict(body["tree"], body["n_features"])
    if kind in ("forest", "bagging"):
        d = body["n_features"]
        return ForestModel(
            tuple(Tree.from_dict(t, d) for t in body["trees"]),
            tuple(body["seeds"]),
            body["max_features"],
            d,
            kind=kind,
        )
    if kind == "adaboost":
        d = body["n_features"]
        return AdaBoostModel(tuple(Tree.from_dict(t, d) for t in body["stumps"]), np.array(body["alphas"], dtype=float), d)
    if kind == "gnb":
        lp = np.array([-np.inf if v is None else v for v in body["log_prior"]], dtype=float)
        return GaussianNBModel(lp, np.array(body["means"], dtype=float), np.array(body["variances"], dtype=float))
    if kind == "sgd":
        return LogisticModel(np.array(body["coef"], dtype=float), float(body["intercept"]))
    if kind == "voting":
        return VotingModel(tuple(_model_from_body(m) for m in body["members"]), body["n_features"])
    raise ClassifierError(f"unknown model kind {kind!r}")


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ClassifierError("not a version-1 model document")
    return _model_from_body(doc["model"])
