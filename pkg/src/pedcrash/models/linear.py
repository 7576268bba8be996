"""Multinomial logistic regression fitted by full-batch gradient descent.

The default solver adds Nesterov momentum with gradient-based restarts on top
of the fixed 1/L step; ``solver="gd"`` runs plain steps. Both stop once the
full gradient norm drops below ``tol`` or after ``max_iter`` steps.
"""
import numpy as np

from ..errors import ModelError
from ..neighbors import zscore_stats
from .base import N_CLASSES, Classifier, softmax


def logistic_objective(W, Xb, Y, l2):
    """Mean multinomial log-loss plus ``l2/2 * ||W[1:]||^2`` and its gradient.

    ``Xb`` carries a leading column of ones; the intercept row ``W[0]`` is not
    penalized.
    """
    Z = Xb @ W
    Z = Z - Z.max(axis=1, keepdims=True)
    logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
    n = Xb.shape[0]
    loss = -np.sum(Y * logp) / n + 0.5 * l2 * np.sum(W[1:] ** 2)
    grad = Xb.T @ (np.exp(logp) - Y) / n
    grad[1:] += l2 * W[1:]
    return loss, grad


class LogisticRegression(Classifier):
    kind = "logreg"

    def fit(self, X, y, rng):
        n, d = X.shape
        self.n_features = d
        self.mean, self.std = zscore_stats(X)
        Xb = np.hstack([np.ones((n, 1)), (X - self.mean) / self.std])
        Y = np.eye(N_CLASSES)[y]
        l2 = float(self.params["l2"])
        # softmax cross-entropy Hessian is bounded by 1/2 * X'X/n
        lip = 0.5 * np.linalg.eigvalsh(Xb.T @ Xb / n).max() + l2
        step = 1.0 / lip
        if self.params["solver"] not in ("agd", "gd"):
            raise ModelError(f"unknown logreg solver {self.params['solver']!r}; use 'agd' or 'gd'")
        momentum = self.params["solver"] == "agd"
        W = np.zeros((d + 1, N_CLASSES))
        V = W
        t = 1.0
        tol = float(self.params["tol"])
        self.n_iter = 0
        self.converged = False
        for it in range(int(self.params["max_iter"])):
            _, grad = logistic_objective(V, Xb, Y, l2)
            if np.linalg.norm(grad) < tol:
                W = V
                self.converged = True
                break
            W_next = V - step * grad
            if momentum:
                if np.sum(grad * (W_next - W)) > 0:
                    t = 1.0  # momentum points uphill: restart
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                V = W_next + (t - 1.0) / t_next * (W_next - W)
                t = t_next
            else:
                V = W_next
            W = W_next
            self.n_iter = it + 1
        self.W = W
        return self

    def _proba(self, X):
        Xb = np.hstack([np.ones((X.shape[0], 1)), (X - self.mean) / self.std])
        return softmax(Xb @ self.W)

    def state(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "W": self.W.tolist()}

    def load_state(self, state):
        self.mean = np.asarray(state["mean"], dtype=float)
        self.std = np.asarray(state["std"], dtype=float)
        self.W = np.asarray(state["W"], dtype=float)
