"""Model specifications and shared plumbing for the classifier zoo."""
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelError

N_CLASSES = 3

DEFAULTS = {
    "dtree": {"max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1},
    "rforest": {"n_trees": 100, "max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1,
                "mtry": "sqrt", "bootstrap": True},
    "xtrees": {"n_trees": 100, "max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1,
               "mtry": "sqrt", "bootstrap": False},
    "gboost": {"rounds": 100, "learning_rate": 0.1, "max_depth": 3, "min_samples_split": 2,
               "min_samples_leaf": 1},
    "adaboost": {"rounds": 50},
    "knn": {"k": 5},
    "gnb": {"var_floor": 1e-9},
    "logreg": {"l2": 1e-4, "tol": 1e-6, "max_iter": 5000, "solver": "agd"},
    "dummy": {},
}
KINDS = tuple(DEFAULTS)
TREE_KINDS = ("dtree", "rforest", "xtrees", "gboost")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ModelError(f"unknown hyperparameter(s) for {self.kind}: {', '.join(sorted(unknown))}")
        object.__setattr__(self, "params", {**DEFAULTS[self.kind], **self.params})


def check_training_data(X, y, n_classes=N_CLASSES):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ModelError(f"bad training shapes X{X.shape} y{y.shape}")
    if not np.all(np.isfinite(X)):
        raise ModelError("training features contain non-finite values")
    if y.min() < 0 or y.max() >= n_classes:
        raise ModelError(f"labels must lie in 0..{n_classes - 1}")
    if np.unique(y).size < 2:
        raise ModelError("training data contains a single category")
    return X, y


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Classifier:
    """Common surface: fit on (X, y), predict_proba on a row or a matrix."""

    kind = ""

    def __init__(self, params, seed=0):
        self.params = dict(params)
        self.seed = int(seed)
        self.n_features = None
        self.n_classes = N_CLASSES

    def fit(self, X, y, rng):  # pragma: no cover - abstract
        raise NotImplementedError

    def _proba(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ModelError(f"expected {self.n_features} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ModelError("input contains non-finite values")
        P = self._proba(np.ascontiguousarray(X))
        return P[0] if single else P

    def predict(self, X):
        return np.argmax(self.predict_proba(np.atleast_2d(X)), axis=1)

    def state(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def load_state(self, state):  # pragma: no cover - abstract
        raise NotImplementedError
