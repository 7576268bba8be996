"""Tree models: single CART, bagged and extremely randomized forests, boosting."""
import numpy as np

from ..rng import substream
from ._kernels import sum_trees
from .base import N_CLASSES, Classifier, softmax
from .tree import Tree, build_tree, presort


def pack_trees(trees):
    """Concatenate flat trees into one set of arrays with global child indices."""
    offsets = np.cumsum([0] + [t.n_nodes for t in trees])[:-1]
    feature = np.concatenate([t.feature for t in trees])
    threshold = np.concatenate([t.threshold for t in trees])
    left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
    right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
    cover = np.concatenate([t.cover for t in trees])
    value = np.vstack([t.value for t in trees])
    return feature, threshold, left, right, cover, value, offsets.astype(np.int64)


class TreeModel(Classifier):
    """A tree ensemble whose raw output is ``offset + scale * sum_t tree_t(x)``.

    For probability forests the raw output already is the class probability;
    for boosting it is the per-class margin passed through softmax.
    """

    output = "probability"

    def __init__(self, params, seed=0):
        super().__init__(params, seed)
        self.trees = []
        self.offset = np.zeros(N_CLASSES)
        self._packed = None

    @property
    def scale(self):
        return 1.0 / len(self.trees)

    def packed(self):
        if self._packed is None:
            self._packed = pack_trees(self.trees)
        return self._packed

    def raw_output(self, X):
        f, t, l, r, _, v, roots = self.packed()
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
        return self.offset + self.scale * sum_trees(X, f, t, l, r, v, roots)

    def _proba(self, X):
        return self.raw_output(X)

    def state(self):
        return {"offset": self.offset.tolist(), "trees": [t.to_dict() for t in self.trees]}

    def load_state(self, state):
        self.offset = np.asarray(state["offset"], dtype=float)
        self.trees = [Tree.from_dict(d) for d in state["trees"]]
        self._packed = None


class DecisionTree(TreeModel):
    kind = "dtree"

    def fit(self, X, y, rng):
        p = self.params
        self.n_features = X.shape[1]
        tree = build_tree(X, y, max_depth=p["max_depth"], min_samples_split=p["min_samples_split"],
                          min_samples_leaf=p["min_samples_leaf"], mtry=None, rng=rng,
                          n_classes=N_CLASSES)
        self.trees = [tree]
        return self


class RandomForest(TreeModel):
    """Bagged gini trees. Each tree draws from its own substream keyed by tree number."""

    kind = "rforest"
    split_mode = "exhaustive"

    def fit(self, X, y, rng):
        p = self.params
        n, d = X.shape
        self.n_features = d
        base = int(rng.integers(0, 2**63 - 1))
        ps = presort(X) if self.split_mode == "exhaustive" else None
        trees = []
        for t in range(int(p["n_trees"])):
            tree_rng = substream(base, t)
            rows = tree_rng.integers(0, n, size=n) if p["bootstrap"] else None
            trees.append(build_tree(
                X, y, max_depth=p["max_depth"], min_samples_split=p["min_samples_split"],
                min_samples_leaf=p["min_samples_leaf"], mtry=p["mtry"], split_mode=self.split_mode,
                rng=tree_rng, n_classes=N_CLASSES, rows=rows, presorted=ps))
        self.trees = trees
        return self


class ExtraTrees(RandomForest):
    kind = "xtrees"
    split_mode = "random"


class GradientBoosting(TreeModel):
    """Softmax boosting on the multinomial deviance.

    Each round fits one squared-error tree per class to the negative gradient
    ``y_k - p_k``; leaf values take one Newton step,
    ``(K-1)/K * sum(r) / sum(p_k (1 - p_k))``, shrunk by the learning rate.
    """

    kind = "gboost"
    output = "margin"

    @property
    def scale(self):
        return 1.0

    def fit(self, X, y, rng):
        p = self.params
        n, d = X.shape
        self.n_features = d
        K = N_CLASSES
        Y = np.eye(K)[y]
        prior = np.clip(Y.mean(axis=0), 1e-12, None)
        self.offset = np.log(prior)
        F = np.tile(self.offset, (n, 1))
        ps = presort(X)
        lr = float(p["learning_rate"])
        trees = []
        self.train_loss = [float(_deviance(F, y))]
        for _ in range(int(p["rounds"])):
            P = softmax(F)
            for k in range(K):
                resid = Y[:, k] - P[:, k]
                tree = build_tree(X, resid, max_depth=p["max_depth"],
                                  min_samples_split=p["min_samples_split"],
                                  min_samples_leaf=p["min_samples_leaf"], task="squared", rng=rng,
                                  presorted=ps)
                leaf = tree.apply(X)
                num = np.bincount(leaf, weights=resid, minlength=tree.n_nodes)
                hess = P[:, k] * (1.0 - P[:, k])
                den = np.bincount(leaf, weights=hess, minlength=tree.n_nodes)
                gamma = np.where(den > 1e-12, (K - 1) / K * num / np.maximum(den, 1e-12), 0.0)
                gamma = np.where(tree.is_leaf, gamma, 0.0) * lr
                value = np.zeros((tree.n_nodes, K))
                value[:, k] = gamma
                tree.value = value
                F[:, k] += gamma[leaf]
                trees.append(tree)
            self.train_loss.append(float(_deviance(F, y)))
        self.trees = trees
        return self

    def _proba(self, X):
        return softmax(self.raw_output(X))


def _deviance(F, y):
    Z = F - F.max(axis=1, keepdims=True)
    logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
    return -logp[np.arange(len(y)), y].mean()


class AdaBoost(Classifier):
    """SAMME with depth-1 gini stumps.

    Probabilities are normalized sums of stage weights voting for each class.
    """

    kind = "adaboost"

    def fit(self, X, y, rng):
        n, d = X.shape
        self.n_features = d
        K = N_CLASSES
        w = np.full(n, 1.0 / n)
        stumps, alphas = [], []
        for _ in range(int(self.params["rounds"])):
            stump = build_tree(X, y, max_depth=1, mtry=None, rng=rng, n_classes=K, sample_weight=w)
            pred = np.argmax(stump.predict(X), axis=1)
            miss = pred != y
            err = float(np.sum(w[miss]) / np.sum(w))
            if err >= 1.0 - 1.0 / K:
                if not stumps:
                    stumps.append(stump)
                    alphas.append(1.0)
                break
            err = max(err, 1e-10)
            alpha = np.log((1.0 - err) / err) + np.log(K - 1.0)
            stumps.append(stump)
            alphas.append(float(alpha))
            if err <= 1e-10:
                break
            w = w * np.exp(alpha * miss)
            w /= w.sum()
        self.stumps = stumps
        self.alphas = np.asarray(alphas)
        return self

    def _proba(self, X):
        votes = np.zeros((X.shape[0], N_CLASSES))
        rows = np.arange(X.shape[0])
        for stump, alpha in zip(self.stumps, self.alphas):
            votes[rows, np.argmax(stump.predict(X), axis=1)] += alpha
        return votes / self.alphas.sum()

    def state(self):
        return {"alphas": self.alphas.tolist(), "stumps": [s.to_dict() for s in self.stumps]}

    def load_state(self, state):
        self.alphas = np.asarray(state["alphas"], dtype=float)
        self.stumps = [Tree.from_dict(d) for d in state["stumps"]]
