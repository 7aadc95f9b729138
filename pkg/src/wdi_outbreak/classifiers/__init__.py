from .ensemble import AdaBoostModel, ForestModel, VotingModel, fit_adaboost, fit_bagging, fit_forest
from .importance import ImportanceVector, gini_importance, tree_importance
from .linear import GaussianNBModel, LogisticModel, fit_gnb, fit_sgd_logistic
from .spec import (
    KINDS,
    ClassifierError,
    ClassifierSpec,
    fit_arrays,
    fit_classifier,
    model_from_dict,
    model_to_dict,
    predict,
)
from .tree import Tree, grow_tree


def fit_cart(X, y, max_depth=None, min_samples_split=2, sample_weight=None) -> Tree:
    return grow_tree(X, y, sample_weight=sample_weight, max_depth=max_depth, min_samples_split=min_samples_split)


__all__ = [
    "AdaBoostModel",
    "ClassifierError",
    "ClassifierSpec",
    "ForestModel",
    "GaussianNBModel",
    "ImportanceVector",
    "KINDS",
    "LogisticModel",
    "Tree",
    "VotingModel",
    "fit_adaboost",
    "fit_arrays",
    "fit_bagging",
    "fit_cart",
    "fit_classifier",
    "fit_forest",
    "fit_gnb",
    "fit_sgd_logistic",
    "gini_importance",
    "grow_tree",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "tree_importance",
]
