"""Shapley attributions: exact enumeration, path-dependent tree algorithm, permutation sampling.

Every explainer attributes the model's *explained output*: the per-category
probability vector, except for gradient boosting where it is the per-category
margin (the quantity the trees add up to; softmax is applied afterwards).
"""
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from ._shap_kernels import all_coalition_values, tree_shap_batch
from .errors import ExplainError
from .models.ensemble import TreeModel
from .pipeline import Pipeline
from .rng import as_generator, substream

TREE_CONDITIONAL = "tree-conditional"
BACKGROUND_MARGINAL = "background-marginal"
MODES = (TREE_CONDITIONAL, BACKGROUND_MARGINAL)
MAX_EXACT_FEATURES = 20


def _unwrap(model):
    """(inner model, raw->inner transform, inner->raw feature map, raw feature count)."""
    if isinstance(model, Pipeline):
        return model.model, model.transform, model.kept, model.n_features
    d = model.n_features
    return model, (lambda X: np.atleast_2d(np.asarray(X, dtype=float))), np.arange(d), d


def output_kind(model):
    inner = model.model if isinstance(model, Pipeline) else model
    return getattr(inner, "output", "probability")


def model_output(model, X):
    """Explained output for each row of X, shape (n, categories).

    ``model`` may also be a plain callable mapping an (n, d) matrix to (n, k).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if callable(model) and not hasattr(model, "predict_proba"):
        return np.atleast_2d(np.asarray(model(X), dtype=float))
    inner, transform, _, _ = _unwrap(model)
    Z = transform(X)
    if getattr(inner, "output", "probability") == "margin":
        return inner.raw_output(Z)
    return inner.predict_proba(Z)


def _n_features(model, x):
    if callable(model) and not hasattr(model, "predict_proba"):
        return np.asarray(x).shape[-1]
    return _unwrap(model)[3]


def is_tree_model(model):
    inner = model.model if isinstance(model, Pipeline) else model
    return isinstance(inner, TreeModel)


def _packed_trees(inner):
    if not inner.trees:
        raise ExplainError("tree model has no trees")
    f, t, l, r, cover, v, roots = inner.packed()
    if cover is None or cover.shape != f.shape or np.any(cover[f >= 0] <= 0):
        raise ExplainError("tree model lacks cover metadata")
    return f, t, l, r, cover, v, roots


def tree_expected_value(model):
    """Cover-weighted expectation of the explained output (the empty-coalition value)."""
    inner = _unwrap(model)[0]
    if not isinstance(inner, TreeModel):
        raise ExplainError(f"{inner.kind} is not a tree model")
    total = np.zeros(inner.offset.shape[0])
    for tree in inner.trees:
        leaf = tree.feature < 0
        total += (tree.cover[leaf, None] * tree.value[leaf]).sum(axis=0) / tree.cover[0]
    return inner.offset + inner.scale * total


def tree_shap(model, X):
    """Path-dependent tree Shapley values for every row of X.

    Returns ``(values, base)`` with ``values`` of shape (n, d, categories)
    over the raw input features and ``base`` the cover-weighted expectation.
    Output equals :func:`exact_shap` in tree-conditional mode.
    """
    inner, transform, kept, d = _unwrap(model)
    if not isinstance(inner, TreeModel):
        raise ExplainError(f"tree_shap needs a tree model, got {getattr(inner, 'kind', inner)!r}")
    f, t, l, r, cover, v, roots = _packed_trees(inner)
    Z = np.ascontiguousarray(transform(X))
    depth = max(tree.depth() for tree in inner.trees)
    phi = tree_shap_batch(Z, f, t, l, r, cover, v, roots, depth, float(inner.scale))
    values = np.zeros((Z.shape[0], d, v.shape[1]))
    values[:, kept, :] = phi
    return values, tree_expected_value(model)


def shapley_weights(n):
    """|S|!(n-|S|-1)!/n! indexed by coalition size |S| = 0..n-1."""
    return np.array([factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)])


def _popcount(masks):
    bits = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        bits += m & 1
        m >>= 1
    return bits


def shapley_from_values(v):
    """Exact Shapley values from the value of every coalition (rows indexed by bitmask)."""
    n_masks = v.shape[0]
    n = n_masks.bit_length() - 1
    masks = np.arange(n_masks, dtype=np.int64)
    size = _popcount(masks)
    w = shapley_weights(n)
    phi = np.zeros((n,) + v.shape[1:])
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.tensordot(w[size[without]], v[without | bit] - v[without], axes=(0, 0))
    return phi


def coalition_values(model, x, mode=TREE_CONDITIONAL, background=None, chunk=4096):
    """Value of every coalition of raw features, shape (2^N, categories)."""
    x = np.asarray(x, dtype=float)
    n = _n_features(model, x)
    if n > MAX_EXACT_FEATURES:
        raise ExplainError(f"exact enumeration limited to {MAX_EXACT_FEATURES} features, got {n}")
    if mode == TREE_CONDITIONAL:
        if callable(model) and not hasattr(model, "predict_proba") or not is_tree_model(model):
            raise ExplainError("tree-conditional values need a tree model")
        inner, transform, kept, _ = _unwrap(model)
        f, t, l, r, cover, v, roots = _packed_trees(inner)
        z = np.ascontiguousarray(transform(x)[0])
        raw = all_coalition_values(z, kept.astype(np.int64), n, f, t, l, r, cover, v, roots)
        return inner.offset + inner.scale * raw
    if mode != BACKGROUND_MARGINAL:
        raise ExplainError(f"unknown value-function mode {mode!r}")
    B = _check_background(background, n)
    masks = np.arange(1 << n, dtype=np.int64)
    present = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    out = []
    step = max(1, chunk // B.shape[0])
    for s in range(0, masks.size, step):
        P = present[s:s + step]
        rows = np.where(P[:, None, :], x[None, None, :], B[None, :, :]).reshape(-1, n)
        out.append(model_output(model, rows).reshape(P.shape[0], B.shape[0], -1).mean(axis=1))
    return np.vstack(out)


def _check_background(background, n):
    if background is None:
        raise ExplainError("background-marginal values need a background sample")
    B = np.atleast_2d(np.asarray(background, dtype=float))
    if B.shape[0] == 0 or B.size == 0:
        raise ExplainError("background sample is empty")
    if B.shape[1] != n:
        raise ExplainError(f"background has {B.shape[1]} columns, model expects {n}")
    return B


def exact_shap(model, x, mode=TREE_CONDITIONAL, background=None, category=None):
    """Shapley values by full subset enumeration.

    Returns shape (N, categories), or (N,) when ``category`` is given.
    """
    phi = shapley_from_values(coalition_values(model, x, mode, background))
    return phi if category is None else phi[:, category]


def permutation_shap(model, x, background, n_permutations=500, rng=None, chunk=50):
    """Monte Carlo Shapley values over random feature orderings.

    Coalition values are background means with absent features overwritten
    by background values. Every ordering's contributions telescope to
    ``f(x) - mean f(background)``, so local accuracy holds up to round-off.

    Returns ``(phi, se)``, both (d, categories); ``se`` is the standard error
    of the mean over orderings (NaN for a single ordering).
    """
    x = np.asarray(x, dtype=float)
    d = _n_features(model, x)
    B = _check_background(background, d)
    n_perm = int(n_permutations)
    if n_perm < 1:
        raise ExplainError("n_permutations must be at least 1")
    rng = as_generator(rng)
    orders = np.array([rng.permutation(d) for _ in range(n_perm)], dtype=np.int64).reshape(n_perm, d)
    k = model_output(model, x[None, :]).shape[1]
    contrib = np.zeros((n_perm, d, k))
    nb = B.shape[0]
    for s in range(0, n_perm, chunk):
        block = orders[s:s + chunk]
        m = block.shape[0]
        # coalition j of ordering p holds its first j features (j = 0..d); every
        # coalition, including the empty and full ones, is averaged the same way
        # so a feature the model ignores gets exactly zero
        rank = np.empty_like(block)
        rank[np.arange(m)[:, None], block] = np.arange(d)[None, :]
        present = rank[:, None, :] < np.arange(d + 1)[None, :, None]  # (m, d+1, d)
        rows = np.where(present[:, :, None, :], x, B[None, None, :, :]).reshape(-1, d)
        v = model_output(model, rows).reshape(m, d + 1, nb, k).mean(axis=2)
        steps = np.diff(v, axis=1)  # steps[p, j] is the gain from adding block[p, j]
        contrib[np.arange(s, s + m)[:, None], block] = steps
    phi = contrib.mean(axis=0)
    se = contrib.std(axis=0, ddof=1) / np.sqrt(n_perm) if n_perm > 1 else np.full(phi.shape, np.nan)
    return phi, se


@dataclass
class ShapMatrix:
    values: np.ndarray  # (instances, features, categories)
    base: np.ndarray  # (categories,)
    feature_names: list
    X: np.ndarray  # raw instance values, (instances, features)
    outputs: np.ndarray  # explained output per instance, (instances, categories)
    method: str = "tree"
    output_kind: str = "probability"
    model_kind: str = ""
    se: np.ndarray = None
    instances: list = field(default_factory=list)

    def __post_init__(self):
        if not self.instances:
            self.instances = list(range(self.values.shape[0]))

    @property
    def n_instances(self):
        return self.values.shape[0]

    def additivity_error(self):
        """max |base + sum_i phi_i - f(x)| over instances and categories."""
        return float(np.max(np.abs(self.base + self.values.sum(axis=1) - self.outputs)))

    def rows(self):
        """(instance, feature, category, value) tuples in instance, feature, category order."""
        n, d, k = self.values.shape
        for a in range(n):
            for j in range(d):
                for c in range(k):
                    yield self.instances[a], self.feature_names[j], c, float(self.values[a, j, c])


def explain_model(model, X, background=None, method="auto", n_permutations=500, seed=0,
                  feature_names=None, instances=None):
    """Attribute every row of X; ``method`` is "auto", "tree" or "permutation".

    "auto" picks the tree algorithm for tree models and permutation sampling
    otherwise. Each instance of the sampled estimator uses its own substream.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ExplainError("nothing to explain: no instances")
    if method == "auto":
        method = "tree" if is_tree_model(model) else "permutation"
    names = list(feature_names) if feature_names is not None else \
        list(getattr(model, "feature_names", [f"x{j}" for j in range(X.shape[1])]))
    instances = list(range(X.shape[0])) if instances is None else [int(i) for i in instances]
    outputs = model_output(model, X)
    se = None
    if method == "tree":
        values, base = tree_shap(model, X)
    elif method == "permutation":
        B = _check_background(background, X.shape[1])
        base = model_output(model, B).mean(axis=0)
        values = np.zeros(X.shape + (outputs.shape[1],))
        se = np.zeros_like(values)
        for a in range(X.shape[0]):
            values[a], se[a] = permutation_shap(model, X[a], B, n_permutations,
                                                substream(seed, "permutation", instances[a]))
    else:
        raise ExplainError(f"unknown explainer {method!r}")
    return ShapMatrix(values, np.asarray(base, dtype=float), names, X, outputs, method,
                      output_kind(model), getattr(model, "kind", ""), se, instances)


@dataclass
class ShapSummary:
    feature_names: list
    importance: np.ndarray  # (categories, features) mean |phi|
    ranking: list  # per category: feature indices, most important first
    overall_importance: np.ndarray
    overall_ranking: list

    def top(self, category, n=5):
        return [self.feature_names[j] for j in self.ranking[category][:n]]

    def beeswarm(self, shap, category):
        """(feature, instance value, phi) tuples, features in ranking order."""
        return [(self.feature_names[j], float(shap.X[a, j]), float(shap.values[a, j, category]))
                for j in self.ranking[category] for a in range(shap.n_instances)]

    def to_dict(self):
        return {
            "overall": [{"feature": self.feature_names[j], "mean_abs": float(self.overall_importance[j])}
                        for j in self.overall_ranking],
            "per_category": [
                [{"feature": self.feature_names[j], "mean_abs": float(self.importance[c, j])}
                 for j in order]
                for c, order in enumerate(self.ranking)
            ],
        }


def _rank(importance):
    # stable sort on the negated values keeps ties in feature-index order
    return np.argsort(-importance, kind="stable").tolist()


def shap_summary(shap):
    """Per-category and overall feature rankings by mean |phi|."""
    if shap.n_instances == 0:
        raise ExplainError("empty ShapMatrix")
    imp = np.abs(shap.values).mean(axis=0).T  # (categories, features)
    overall = imp.mean(axis=0)
    return ShapSummary(list(shap.feature_names), imp, [_rank(row) for row in imp], overall,
                       _rank(overall))


@dataclass
class ForceBreakdown:
    base: float
    output: float
    contributions: list  # (feature, input value, phi), |phi| descending
    category: int
    predicted: int
    instance: int = 0

    def to_dict(self):
        return {
            "instance": self.instance,
            "category": self.category,
            "predicted": self.predicted,
            "base": self.base,
            "output": self.output,
            "contributions": [{"feature": f, "value": v, "phi": p} for f, v, p in self.contributions],
        }


def force_breakdown(shap, index, category):
    if not 0 <= index < shap.n_instances:
        raise ExplainError(f"instance index {index} out of range 0..{shap.n_instances - 1}")
    if not 0 <= category < shap.values.shape[2]:
        raise ExplainError(f"category {category} out of range")
    phi = shap.values[index, :, category]
    order = np.argsort(-np.abs(phi), kind="stable")
    return ForceBreakdown(
        base=float(shap.base[category]),
        output=float(shap.outputs[index, category]),
        contributions=[(shap.feature_names[j], float(shap.X[index, j]), float(phi[j])) for j in order],
        category=int(category),
        predicted=int(np.argmax(shap.outputs[index])),
        instance=int(shap.instances[index]),
    )
