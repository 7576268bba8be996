"""From-scratch classifier zoo over the three severity categories."""

from ..errors import ModelError
from ..rng import as_generator
from .base import DEFAULTS, KINDS, N_CLASSES, TREE_KINDS, Classifier, ModelSpec, check_training_data
from .ensemble import AdaBoost, DecisionTree, ExtraTrees, GradientBoosting, RandomForest, TreeModel
from .linear import LogisticRegression, logistic_objective
from .simple import Dummy, GaussianNB, KNeighbors
from .tree import Tree, build_tree, gini_impurity

_CLASSES = {
    "dtree": DecisionTree,
    "rforest": RandomForest,
    "xtrees": ExtraTrees,
    "gboost": GradientBoosting,
    "adaboost": AdaBoost,
    "knn": KNeighbors,
    "gnb": GaussianNB,
    "logreg": LogisticRegression,
    "dummy": Dummy,
}


def fit(spec, X, y, rng=None):
    """Fit the model described by ``spec``; ``rng`` defaults to a stream seeded by ``spec.seed``."""
    if not isinstance(spec, ModelSpec):
        spec = ModelSpec(*spec) if isinstance(spec, tuple) else ModelSpec(spec)
    X, y = check_training_data(X, y)
    rng = as_generator(spec.seed if rng is None else rng)
    model = _CLASSES[spec.kind](spec.params, spec.seed)
    return model.fit(X, y, rng)


def predict_proba(model, x):
    return model.predict_proba(x)


def model_to_dict(model):
    return {
        "kind": model.kind,
        "params": model.params,
        "seed": model.seed,
        "n_features": model.n_features,
        "state": model.state(),
    }


def model_from_dict(doc):
    kind = doc["kind"]
    if kind not in _CLASSES:
        raise ModelError(f"unknown model kind {kind!r} in serialized model")
    model = _CLASSES[kind](doc["params"], doc.get("seed", 0))
    model.n_features = int(doc["n_features"])
    model.load_state(doc["state"])
    return model


__all__ = [
    "AdaBoost", "Classifier", "DEFAULTS", "DecisionTree", "Dummy", "ExtraTrees", "GaussianNB",
    "GradientBoosting", "KINDS", "KNeighbors", "LogisticRegression", "ModelSpec", "N_CLASSES",
    "RandomForest", "TREE_KINDS", "Tree", "TreeModel", "build_tree", "fit", "gini_impurity",
    "logistic_objective", "model_from_dict", "model_to_dict", "predict_proba",
]
