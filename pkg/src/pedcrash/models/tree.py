"""CART trees on flat arrays."""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ModelError
from ..rng import as_generator, draw_seed
from ._kernels import TASK_GINI, TASK_SQUARED, apply_tree, grow_tree

NO_DEPTH_LIMIT = 2**31
_EMPTY_SORT = np.zeros((0, 0), dtype=np.int64)


def presort(X):
    """Per-feature stable argsort of the columns of X, shape (d, n)."""
    X = np.asarray(X, dtype=float)
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="mergesort").T.astype(np.int64))


def gini_impurity(counts):
    """1 - sum_c p_c^2 for per-category counts."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini impurity of an empty node is undefined")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    cover: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def is_leaf(self):
        return self.feature < 0

    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        return apply_tree(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                          self.left, self.right)

    def predict(self, X):
        X = np.atleast_2d(X)
        return self.value[self.apply(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "cover": self.cover.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["cover"], dtype=float),
            np.asarray(d["value"], dtype=float).reshape(len(d["feature"]), -1),
        )


def resolve_mtry(mtry, n_features):
    if mtry is None or mtry == "all":
        return n_features
    if mtry == "sqrt":
        return max(1, int(math.floor(math.sqrt(n_features))))
    if mtry == "log2":
        return max(1, int(math.floor(math.log2(n_features))))
    if isinstance(mtry, float) and 0 < mtry <= 1:
        return max(1, int(math.floor(mtry * n_features)))
    mtry = int(mtry)
    if mtry < 1:
        raise ModelError(f"mtry must be positive, got {mtry}")
    return min(mtry, n_features)


def build_tree(X, y, max_depth=None, min_samples_split=2, min_samples_leaf=1, mtry=None,
               split_mode="exhaustive", task="gini", rng=None, n_classes=3,
               sample_weight=None, rows=None, presorted=None):
    """Grow a classification (gini) or regression (squared error) tree.

    ``y`` holds integer labels for ``task="gini"`` and real targets for
    ``task="squared"``. ``rows`` selects (possibly repeated) training rows;
    covers count those rows. ``presorted`` (from :func:`presort`) speeds up
    repeated growth on the same matrix. Exhaustive mode scans midpoints between sorted
    unique values; ``split_mode="random"`` draws one uniform threshold per
    candidate feature. Ties go to the lower feature index, then threshold.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ModelError("cannot grow a tree on empty input")
    n, d = X.shape
    if split_mode not in ("exhaustive", "random"):
        raise ModelError(f"unknown split_mode {split_mode!r}")
    if task in ("gini", "gini-classification"):
        code = TASK_GINI
        labels = np.asarray(y, dtype=np.int64)
        targets = np.zeros(n)
        n_out = int(n_classes)
    elif task in ("squared", "squared-error-regression"):
        code = TASK_SQUARED
        labels = np.zeros(n, dtype=np.int64)
        targets = np.asarray(y, dtype=float)
        n_out = 1
    else:
        raise ModelError(f"unknown task {task!r}")
    weights = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    rows = np.arange(n, dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ModelError("cannot grow a tree on empty input")
    max_depth = NO_DEPTH_LIMIT if max_depth is None else int(max_depth)
    if max_depth < 0 or int(min_samples_split) < 2 or int(min_samples_leaf) < 1:
        raise ModelError("invalid stopping parameters")
    rng = as_generator(rng)
    out = grow_tree(X, rows, labels, targets, weights, n_out, code, max_depth,
                    int(min_samples_split), int(min_samples_leaf), resolve_mtry(mtry, d),
                    split_mode == "random", draw_seed(rng),
                    _EMPTY_SORT if presorted is None else presorted)
    return Tree(*out[:6])
