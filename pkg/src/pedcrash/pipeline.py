"""A fitted model together with the preprocessing it was trained behind."""
import numpy as np

from .errors import ModelError
from .models import model_from_dict, model_to_dict


class Pipeline:
    """Column selection, per-column standardization, then a classifier.

    Inputs are raw encoded rows over all schema features; ``kept`` lists the
    columns surviving collinearity pruning, ``mean``/``std`` standardize them
    (identity when normalization is off).
    """

    def __init__(self, model, kept, mean, std, feature_names):
        self.model = model
        self.kept = np.asarray(kept, dtype=np.int64)
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        self.feature_names = list(feature_names)
        self.n_features = len(self.feature_names)
        self.kind = model.kind

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ModelError(f"expected {self.n_features} features, got {X.shape[1]}")
        return (X[:, self.kept] - self.mean) / self.std

    def predict_proba(self, X):
        x = np.asarray(X, dtype=float)
        P = self.model.predict_proba(self.transform(x))
        return P[0] if x.ndim == 1 else P

    def predict(self, X):
        return np.argmax(np.atleast_2d(self.predict_proba(X)), axis=1)

    def to_dict(self):
        return {
            "feature_names": self.feature_names,
            "kept": self.kept.tolist(),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "model": model_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(model_from_dict(doc["model"]), doc["kept"], doc["mean"], doc["std"],
                       doc["feature_names"])
        except KeyError as exc:
            raise ModelError(f"serialized pipeline lacks field {exc.args[0]!r}") from None
