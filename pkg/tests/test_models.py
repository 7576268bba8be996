import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import central_difference, softmax_loss
from pedcrash.errors import ModelError
from pedcrash.models import (KINDS, ModelSpec, build_tree, fit, gini_impurity, logistic_objective,
                             model_from_dict, model_to_dict)

FAST = {
    "rforest": {"n_trees": 10},
    "xtrees": {"n_trees": 10},
    "gboost": {"rounds": 10},
    "adaboost": {"rounds": 10},
}


def small_spec(kind, seed=0):
    return ModelSpec(kind, FAST.get(kind, {}), seed)


@pytest.mark.parametrize("counts,expected", [
    ((0, 10, 0), 0.0),
    ((5, 5), 0.5),
    ((476, 1363, 6480), 0.3632),
])
def test_gini_examples(counts, expected):
    assert gini_impurity(counts) == pytest.approx(expected, abs=1e-4)


def test_gini_severity_totals_by_hand():
    n = 476 + 1363 + 6480
    by_hand = 1 - (476**2 + 1363**2 + 6480**2) / n**2
    assert gini_impurity([476, 1363, 6480]) == pytest.approx(by_hand, rel=1e-12)


def test_gini_rejects_empty():
    with pytest.raises(ValueError):
        gini_impurity([0, 0, 0])


def test_tree_midpoint_split():
    X = np.array([[1.0], [2.0], [10.0], [11.0]])
    tree = build_tree(X, np.array([0, 0, 1, 1]))
    assert tree.feature[0] == 0 and tree.threshold[0] == 6.0
    left, right = tree.left[0], tree.right[0]
    assert tree.value[left].tolist() == [1.0, 0.0, 0.0]
    assert tree.value[right].tolist() == [0.0, 1.0, 0.0]
    assert tree.n_nodes == 3


def test_tree_pure_labels_single_leaf():
    X = np.random.default_rng(0).normal(size=(20, 3))
    tree = build_tree(X, np.full(20, 2))
    assert tree.n_nodes == 1 and tree.depth() == 0
    assert tree.value[0].tolist() == [0.0, 0.0, 1.0]


def test_tree_depth_zero_is_prior():
    X = np.arange(10, dtype=float)[:, None]
    y = np.array([0] * 5 + [1] * 3 + [2] * 2)
    tree = build_tree(X, y, max_depth=0)
    assert tree.n_nodes == 1
    assert np.allclose(tree.value[0], [0.5, 0.3, 0.2])


def test_tree_tie_prefers_lower_feature():
    # both columns separate the labels perfectly
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    tree = build_tree(X, np.array([0, 0, 1, 1]))
    assert tree.feature[0] == 0


def test_tree_empty_input():
    with pytest.raises(ModelError):
        build_tree(np.zeros((0, 2)), np.zeros(0, dtype=int))


@given(st.integers(0, 10**6), st.sampled_from(["exhaustive", "random"]))
def test_tree_covers_add_up(seed, mode):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 4))
    y = rng.integers(0, 3, 80)
    tree = build_tree(X, y, split_mode=mode, rng=seed)
    assert tree.cover[0] == 80
    internal = np.flatnonzero(tree.feature >= 0)
    assert np.all(tree.cover[tree.left[internal]] + tree.cover[tree.right[internal]] == tree.cover[internal])
    leaves = tree.feature < 0
    assert np.allclose(tree.value[leaves].sum(axis=1), 1.0)
    assert np.all(tree.value[leaves] >= 0)


def test_tree_leaves_fit_training_data_exactly():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 3, 60)
    tree = build_tree(X, y)
    assert np.array_equal(np.argmax(tree.predict(X), axis=1), y)


def test_regression_tree_means():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    t = np.array([1.0, 1.0, 5.0, 5.0])
    tree = build_tree(X, t, task="squared", max_depth=1)
    assert tree.threshold[0] == 1.5
    assert tree.predict(X)[:, 0].tolist() == [1.0, 1.0, 5.0, 5.0]


def test_forest_of_one_equals_tree(blobs):
    X, y = blobs
    tree = fit(ModelSpec("dtree"), X, y)
    forest = fit(ModelSpec("rforest", {"n_trees": 1, "bootstrap": False, "mtry": "all"}), X, y)
    Q = np.random.default_rng(5).normal(scale=3, size=(500, 4))
    assert np.array_equal(tree.predict_proba(Q), forest.predict_proba(Q))


@pytest.mark.parametrize("kind", KINDS)
def test_outputs_on_simplex(kind, blobs):
    X, y = blobs
    model = fit(small_spec(kind), X, y)
    Q = np.random.default_rng(2).normal(scale=4, size=(1000, 4))
    P = model.predict_proba(Q)
    assert P.shape == (1000, 3)
    assert np.all(P >= 0)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9, rtol=0)


@pytest.mark.parametrize("kind", KINDS)
def test_fit_is_deterministic(kind, blobs):
    X, y = blobs
    a = model_to_dict(fit(small_spec(kind, seed=4), X, y))
    b = model_to_dict(fit(small_spec(kind, seed=4), X, y))
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


@pytest.mark.parametrize("kind", KINDS)
def test_serialization_round_trip(kind, blobs):
    X, y = blobs
    model = fit(small_spec(kind), X, y)
    doc = json.loads(json.dumps(model_to_dict(model)))
    again = model_from_dict(doc)
    Q = np.random.default_rng(3).normal(scale=3, size=(50, 4))
    assert np.array_equal(model.predict_proba(Q), again.predict_proba(Q))


@pytest.mark.parametrize("kind", [k for k in KINDS if k != "dummy"])
def test_models_learn_separated_blobs(kind, blobs):
    X, y = blobs
    model = fit(small_spec(kind), X, y)
    assert np.mean(model.predict(X) == y) > 0.9


def test_dummy_balanced_thirds():
    X = np.random.default_rng(0).normal(size=(300, 2))
    y = np.repeat([0, 1, 2], 100)
    model = fit(ModelSpec("dummy"), X, y)
    P = model.predict_proba(np.random.default_rng(1).normal(size=(20, 2)))
    assert np.allclose(P, 1 / 3)
    assert model.predict_proba(np.zeros(2)).tolist() == model.priors.tolist()


def test_single_pure_leaf_one_hot():
    X = np.array([[0.0], [1.0]])
    model = fit(ModelSpec("dtree"), X, np.array([0, 2]))
    assert model.predict_proba(np.array([0.0])).tolist() == [1.0, 0.0, 0.0]
    assert model.predict_proba(np.array([1.0])).tolist() == [0.0, 0.0, 1.0]


def test_gnb_symmetric_midpoint():
    X = np.array([[-2.0], [0.0], [0.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    model = fit(ModelSpec("gnb"), X, y)
    assert np.allclose(model.predict_proba(np.array([0.0])), [0.5, 0.5, 0.0])


def test_logreg_separable_toy():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(90, 2))
    y = np.where(X[:, 0] + X[:, 1] > 0.3, 1, np.where(X[:, 0] - X[:, 1] > 0.3, 2, 0))
    # keep a margin so the classes are separable by construction
    margin = np.minimum(np.abs(X[:, 0] + X[:, 1] - 0.3), np.abs(X[:, 0] - X[:, 1] - 0.3))
    X, y = X[margin > 0.1], y[margin > 0.1]
    model = fit(ModelSpec("logreg", {"l2": 0.0, "max_iter": 20000}), X, y)
    assert np.mean(model.predict(X) == y) == 1.0


def test_logreg_converges_on_blobs(blobs):
    X, y = blobs
    model = fit(ModelSpec("logreg"), X, y)
    assert model.converged and model.n_iter < 5000


def test_logreg_solvers_agree(blobs):
    X, y = blobs
    a = fit(ModelSpec("logreg", {"l2": 0.1}), X, y)
    b = fit(ModelSpec("logreg", {"l2": 0.1, "solver": "gd"}), X, y)
    assert a.converged and b.converged
    assert np.allclose(a.W, b.W, atol=1e-5)


def test_logreg_bad_solver(blobs):
    with pytest.raises(ModelError):
        fit(ModelSpec("logreg", {"solver": "newton"}), *blobs)


@given(st.integers(0, 10**6))
def test_logistic_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    Xb = np.hstack([np.ones((30, 1)), rng.normal(size=(30, 4))])
    Y = np.eye(3)[rng.integers(0, 3, 30)]
    W = rng.normal(size=(5, 3))
    loss, grad = logistic_objective(W, Xb, Y, 0.3)
    assert loss == pytest.approx(softmax_loss(W, Xb, Y, 0.3), rel=1e-12)
    num = central_difference(lambda V: softmax_loss(V, Xb, Y, 0.3), W)
    assert np.linalg.norm(grad - num) / max(np.linalg.norm(num), 1e-12) < 1e-5


def test_gboost_loss_non_increasing(small_data):
    X, y = small_data.X, small_data.y
    model = fit(ModelSpec("gboost"), X, y)
    loss = np.array(model.train_loss)
    assert len(loss) == 101
    assert np.all(np.diff(loss) <= 1e-12)


def test_gboost_margin_softmax(blobs):
    from pedcrash.models.base import softmax

    X, y = blobs
    model = fit(small_spec("gboost"), X, y)
    assert np.allclose(softmax(model.raw_output(X)), model.predict_proba(X))


def test_knn_vote_fractions():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    y = np.array([0, 1, 1, 2])
    model = fit(ModelSpec("knn", {"k": 3}), X, y)
    assert np.allclose(model.predict_proba(np.array([0.9])), [1 / 3, 2 / 3, 0])


def test_adaboost_stumps(blobs):
    X, y = blobs
    model = fit(small_spec("adaboost"), X, y)
    assert all(t.depth() <= 1 for t in model.stumps)


@pytest.mark.parametrize("kind", ["dtree", "gnb", "logreg"])
def test_single_category_rejected(kind):
    with pytest.raises(ModelError):
        fit(ModelSpec(kind), np.zeros((5, 2)), np.zeros(5, dtype=int))


def test_non_finite_rejected(blobs):
    X, y = blobs
    X = X.copy()
    X[3, 1] = np.nan
    with pytest.raises(ModelError):
        fit(ModelSpec("dtree"), X, y)


def test_dimension_mismatch(blobs):
    model = fit(ModelSpec("dummy"), *blobs)
    with pytest.raises(ModelError):
        model.predict_proba(np.zeros(3))


def test_unknown_kind_and_param():
    with pytest.raises(ModelError):
        ModelSpec("svm")
    with pytest.raises(ModelError):
        ModelSpec("knn", {"neighbors": 3})
