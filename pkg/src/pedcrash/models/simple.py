"""Non-tree classifiers: k-NN, Gaussian naive Bayes, prior-only baseline."""
import numpy as np
from scipy.special import logsumexp

from ..neighbors import kneighbors, zscore_stats
from .base import N_CLASSES, Classifier


class KNeighbors(Classifier):
    """Vote fractions among the k nearest z-scored training rows (distance ties -> lower index)."""

    kind = "knn"

    def fit(self, X, y, rng):
        self.n_features = X.shape[1]
        self.mean, self.std = zscore_stats(X)
        self.train = (X - self.mean) / self.std
        self.labels = np.asarray(y, dtype=np.int64)
        return self

    def _proba(self, X):
        k = min(int(self.params["k"]), self.train.shape[0])
        idx, _ = kneighbors((X - self.mean) / self.std, self.train, k)
        P = np.zeros((X.shape[0], N_CLASSES))
        for j in range(k):
            P[np.arange(X.shape[0]), self.labels[idx[:, j]]] += 1.0
        return P / k

    def state(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "train": self.train.tolist(), "labels": self.labels.tolist()}

    def load_state(self, state):
        self.mean = np.asarray(state["mean"], dtype=float)
        self.std = np.asarray(state["std"], dtype=float)
        self.train = np.ascontiguousarray(state["train"], dtype=float)
        self.labels = np.asarray(state["labels"], dtype=np.int64)


class GaussianNB(Classifier):
    kind = "gnb"

    def fit(self, X, y, rng):
        self.n_features = X.shape[1]
        floor = float(self.params["var_floor"])
        self.log_prior = np.full(N_CLASSES, -np.inf)
        self.means = np.zeros((N_CLASSES, X.shape[1]))
        self.vars = np.ones((N_CLASSES, X.shape[1]))
        for c in range(N_CLASSES):
            rows = X[y == c]
            if rows.shape[0] == 0:
                continue
            self.log_prior[c] = np.log(rows.shape[0] / X.shape[0])
            self.means[c] = rows.mean(axis=0)
            self.vars[c] = np.maximum(rows.var(axis=0), floor)
        return self

    def joint_log_likelihood(self, X):
        jll = np.empty((X.shape[0], N_CLASSES))
        for c in range(N_CLASSES):
            diff = X - self.means[c]
            jll[:, c] = (self.log_prior[c]
                         - 0.5 * np.sum(np.log(2.0 * np.pi * self.vars[c]))
                         - 0.5 * np.sum(diff * diff / self.vars[c], axis=1))
        return jll

    def _proba(self, X):
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def state(self):
        return {"log_prior": [float(v) if np.isfinite(v) else None for v in self.log_prior],
                "means": self.means.tolist(), "vars": self.vars.tolist()}

    def load_state(self, state):
        self.log_prior = np.array([-np.inf if v is None else v for v in state["log_prior"]])
        self.means = np.asarray(state["means"], dtype=float)
        self.vars = np.asarray(state["vars"], dtype=float)


class Dummy(Classifier):
    """Training-set category priors, whatever the input."""

    kind = "dummy"

    def fit(self, X, y, rng):
        self.n_features = X.shape[1]
        self.priors = np.bincount(y, minlength=N_CLASSES) / len(y)
        return self

    def _proba(self, X):
        return np.tile(self.priors, (X.shape[0], 1))

    def state(self):
        return {"priors": self.priors.tolist()}

    def load_state(self, state):
        self.priors = np.asarray(state["priors"], dtype=float)
