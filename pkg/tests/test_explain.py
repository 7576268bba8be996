from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import enumerate_shapley, tree_conditional_value
from pedcrash.errors import ExplainError
from pedcrash.explain import (BACKGROUND_MARGINAL, TREE_CONDITIONAL, ShapMatrix, exact_shap,
                              explain_model, force_breakdown, model_output, permutation_shap,
                              shap_summary, shapley_weights, tree_expected_value, tree_shap)
from pedcrash.models import DecisionTree, ModelSpec, Tree, fit
from pedcrash.pipeline import Pipeline


def oracle_tree_shap(model, x):
    """Subset-formula Shapley values of a tree ensemble under cover-weighted descent."""
    arrays = [(t.feature, t.threshold, t.left, t.right, t.cover, t.value) for t in model.trees]
    cache = {}

    def value(S):
        if S not in cache:
            total = sum(tree_conditional_value(a, x, S) for a in arrays)
            cache[S] = model.offset + model.scale * total
        return cache[S]

    return enumerate_shapley(value, model.n_features), value(frozenset())


def random_tree_model(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 13))
    n = int(rng.integers(20, 120))
    X = np.round(rng.normal(size=(n, d)), 1)
    y = rng.integers(0, 3, n)
    y[:3] = [0, 1, 2]
    kind = ["dtree", "rforest", "xtrees", "gboost"][seed % 4]
    params = {"max_depth": int(rng.integers(1, 5))}
    if kind in ("rforest", "xtrees"):
        params["n_trees"] = int(rng.integers(1, 4))
    if kind == "gboost":
        params["rounds"] = int(rng.integers(1, 3))
    model = fit(ModelSpec(kind, params, seed), X, y)
    return model, rng.normal(size=(3, d))


@given(st.integers(0, 10**6))
def test_tree_shap_matches_subset_enumeration(seed):
    model, Q = random_tree_model(seed)
    values, base = tree_shap(model, Q)
    for a in range(Q.shape[0]):
        ref, ref_base = oracle_tree_shap(model, Q[a])
        assert np.max(np.abs(values[a] - ref)) <= 1e-9
        assert np.allclose(base, ref_base, atol=1e-12)


@given(st.integers(0, 10**6))
def test_tree_shap_matches_exact_enumeration(seed):
    model, Q = random_tree_model(seed)
    values, base = tree_shap(model, Q)
    for a in range(Q.shape[0]):
        assert np.max(np.abs(values[a] - exact_shap(model, Q[a], TREE_CONDITIONAL))) <= 1e-9
    assert np.max(np.abs(base + values.sum(axis=1) - model_output(model, Q))) <= 1e-9


def test_depth_one_tree():
    X = np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 6.0], [3.0, 6.0]])
    model = fit(ModelSpec("dtree", {"max_depth": 1}), X, np.array([0, 0, 1, 1]))
    x = np.array([0.5, 7.0])
    values, base = tree_shap(model, x[None, :])
    ref, _ = oracle_tree_shap(model, x)
    assert np.allclose(values[0], ref, atol=1e-12)
    # one split on feature 0: the whole difference goes to it
    assert np.allclose(values[0, 1], 0.0)
    assert np.allclose(values[0, 0], model.predict_proba(x) - base)


def test_constant_leaf_forest_zero():
    X = np.random.default_rng(0).normal(size=(30, 3))
    y = np.array([0, 1, 2] * 10)
    model = fit(ModelSpec("rforest", {"n_trees": 5, "max_depth": 0}), X, y)
    values, _ = tree_shap(model, X[:5])
    assert np.all(values == 0.0)


def test_tree_shap_needs_tree_model(blobs):
    with pytest.raises(ExplainError):
        tree_shap(fit(ModelSpec("gnb"), *blobs), blobs[0][:2])


def test_missing_covers_rejected(blobs):
    model = fit(ModelSpec("dtree", {"max_depth": 2}), *blobs)
    model.trees[0].cover[:] = 0.0
    model._packed = None
    with pytest.raises(ExplainError):
        tree_shap(model, blobs[0][:1])


def test_gboost_explains_margin(blobs):
    X, y = blobs
    model = fit(ModelSpec("gboost", {"rounds": 5}), X, y)
    values, base = tree_shap(model, X[:10])
    assert np.allclose(base + values.sum(axis=1), model.raw_output(X[:10]), atol=1e-9)


def test_tree_base_is_cover_weighted_training_mean(blobs):
    X, y = blobs
    model = fit(ModelSpec("dtree", {"max_depth": 3}), X, y)
    # covers count training rows, so the expectation is the mean training prediction
    assert np.allclose(tree_expected_value(model), model.predict_proba(X).mean(axis=0), atol=1e-12)


def symmetric_tree():
    """Depth-2 tree scoring (x0 > .5) + (x1 > .5), equal covers in all four cells."""
    feature = np.array([0, 1, 1, -1, -1, -1, -1])
    threshold = np.array([0.5, 0.5, 0.5, 0, 0, 0, 0], dtype=float)
    left = np.array([1, 3, 5, -1, -1, -1, -1])
    right = np.array([2, 4, 6, -1, -1, -1, -1])
    cover = np.array([100, 50, 50, 25, 25, 25, 25], dtype=float)
    score = np.array([0, 0, 0, 0, 1, 1, 2]) / 2
    value = np.zeros((7, 3))
    value[:, 0] = 1 - score
    value[:, 1] = score
    model = DecisionTree({}, 0)
    model.trees = [Tree(feature, threshold, left, right, cover, value)]
    model.n_features = 3
    return model


@pytest.mark.parametrize("x", [[0.0, 0.0, 7.0], [1.0, 1.0, -3.0]])
def test_symmetry_and_dummy_tree(x):
    model = symmetric_tree()
    x = np.array(x)
    phi = exact_shap(model, x, TREE_CONDITIONAL)
    assert np.array_equal(phi[0], phi[1])
    assert np.all(phi[2] == 0.0)
    values, _ = tree_shap(model, x[None, :])
    assert np.allclose(values[0], phi, atol=1e-12)
    assert np.all(values[0, 2] == 0.0)


def additive(X):
    g = np.tanh
    s = g(X[:, 0]) + g(X[:, 1])
    return np.column_stack([s, -s, 0.5 * s])


def test_symmetry_background_marginal():
    rng = np.random.default_rng(4)
    B = rng.normal(size=(20, 3))
    B = np.vstack([B, B[:, [1, 0, 2]]])  # exchangeable in features 0 and 1
    x = np.array([0.3, 0.3, 2.0])
    phi = exact_shap(additive, x, BACKGROUND_MARGINAL, B)
    assert np.allclose(phi[0], phi[1], atol=1e-12)
    assert np.all(phi[2] == 0.0)


def test_one_feature_exact_and_permutation():
    def f(X):
        return np.column_stack([X[:, 0] ** 2, np.sin(X[:, 0]), np.ones(len(X))])

    B = np.array([[0.0], [1.0], [3.0]])
    x = np.array([2.0])
    target = f(x[None, :])[0] - f(B).mean(axis=0)
    assert np.allclose(exact_shap(f, x, BACKGROUND_MARGINAL, B)[0], target, atol=1e-12)
    phi, _ = permutation_shap(f, x, B, n_permutations=7, rng=0)
    assert np.allclose(phi[0], target, atol=1e-12)


def test_exact_marginal_matches_subset_formula():
    rng = np.random.default_rng(8)
    B = rng.normal(size=(6, 4))
    x = rng.normal(size=4)

    def f(X):
        z = X[:, 0] * X[:, 1] + np.exp(0.3 * X[:, 2]) - X[:, 3] ** 2
        return np.column_stack([z, z * z, np.ones(len(z))])

    def value(S):
        rows = B.copy()
        for j in S:
            rows[:, j] = x[j]
        return f(rows).mean(axis=0)

    assert np.allclose(exact_shap(f, x, BACKGROUND_MARGINAL, B), enumerate_shapley(value, 4), atol=1e-12)


def test_shapley_weights_sum_to_one():
    # each size-s coalition of the other n-1 players appears C(n-1, s) times
    for n in range(1, 9):
        w = shapley_weights(n)
        assert sum(w[s] * comb(n - 1, s) for s in range(n)) == pytest.approx(1.0, abs=1e-14)


def test_exact_guard():
    with pytest.raises(ExplainError):
        exact_shap(lambda X: X[:, :3], np.zeros(21), BACKGROUND_MARGINAL, np.zeros((1, 21)))


def test_mode_model_pairing(blobs):
    model = fit(ModelSpec("knn"), *blobs)
    with pytest.raises(ExplainError):
        exact_shap(model, blobs[0][0], TREE_CONDITIONAL)
    with pytest.raises(ExplainError):
        exact_shap(model, blobs[0][0], BACKGROUND_MARGINAL, None)
    with pytest.raises(ExplainError):
        exact_shap(model, blobs[0][0], "interventional", blobs[0][:3])


def test_permutation_empty_background():
    with pytest.raises(ExplainError):
        permutation_shap(additive, np.zeros(3), np.zeros((0, 3)))


def linear(X):
    w = np.array([[1.0, -2.0, 0.5], [0.3, 0.0, 1.0], [-1.0, 1.0, 0.0]])
    return X @ w


def test_permutation_linear_within_three_se():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(30, 3))
    for _ in range(20):
        x = rng.normal(size=3)
        exact = exact_shap(linear, x, BACKGROUND_MARGINAL, B)
        phi, se = permutation_shap(linear, x, B, n_permutations=2000, rng=rng)
        assert np.all(np.abs(phi - exact) <= 3 * se + 1e-12)


def interacting(X):
    z = X[:, 0] * X[:, 1] + np.sin(X[:, 2]) * X[:, 0]
    return np.column_stack([z, np.tanh(z), X[:, 1] * X[:, 2]])


def test_permutation_nonlinear_coverage():
    rng = np.random.default_rng(2)
    B = rng.normal(size=(20, 3))
    z = []
    for a in range(20):
        x = rng.normal(size=3)
        exact = exact_shap(interacting, x, BACKGROUND_MARGINAL, B)
        phi, se = permutation_shap(interacting, x, B, n_permutations=2000, rng=a)
        ok = se > 1e-10  # irrelevant features only carry round-off
        z.extend((np.abs(phi - exact)[ok] / se[ok]).tolist())
    z = np.array(z)
    assert np.mean(z <= 3) >= 0.95
    assert np.mean(z <= 1) >= 0.5


def test_permutation_local_accuracy_exact():
    rng = np.random.default_rng(3)
    B = rng.normal(size=(15, 3))
    x = rng.normal(size=3)
    phi, _ = permutation_shap(interacting, x, B, n_permutations=3, rng=0)
    target = interacting(x[None, :])[0] - interacting(B).mean(axis=0)
    assert np.allclose(phi.sum(axis=0), target, atol=1e-12)


def test_permutation_se_shrinks_as_root_n():
    rng = np.random.default_rng(5)
    B = rng.normal(size=(20, 3))
    x = np.array([1.0, -0.5, 2.0])
    se = [permutation_shap(interacting, x, B, n, rng=9)[1].mean() for n in (100, 400, 1600)]
    for a, b in zip(se, se[1:]):
        assert 1.6 < a / b < 2.5


def test_permutation_deterministic():
    B = np.random.default_rng(0).normal(size=(10, 3))
    x = np.ones(3)
    a = permutation_shap(interacting, x, B, 50, rng=4)
    b = permutation_shap(interacting, x, B, 50, rng=4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_permutation_dummy_feature_exactly_zero():
    B = np.random.default_rng(0).normal(size=(10, 4))

    def f(X):
        return interacting(X[:, :3])

    phi, se = permutation_shap(f, np.array([0.2, 0.4, -1.0, 50.0]), B, 40, rng=1)
    assert np.all(phi[3] == 0.0) and np.all(se[3] == 0.0)


@pytest.fixture(scope="module")
def piped(blobs_module):
    X, y = blobs_module
    kept = np.array([0, 1, 3])
    mean = X[:, kept].mean(axis=0)
    std = X[:, kept].std(axis=0)
    names = ["a", "b", "c", "d"]
    out = {}
    for kind in ("rforest", "knn", "gboost"):
        model = fit(ModelSpec(kind, {"n_trees": 5} if kind == "rforest" else
                              {"rounds": 5} if kind == "gboost" else {}), (X[:, kept] - mean) / std, y)
        out[kind] = Pipeline(model, kept, mean, std, names)
    return out, X


@pytest.fixture(scope="module")
def blobs_module():
    rng = np.random.default_rng(11)
    centers = np.array([[0, 0, 0, 0], [4, 4, 0, 0], [0, 4, 4, 1]], dtype=float)
    X = np.vstack([c + rng.normal(scale=0.8, size=(40, 4)) for c in centers])
    return X, np.repeat([0, 1, 2], 40)


@pytest.mark.parametrize("kind", ["rforest", "gboost"])
def test_pipeline_tree_shap_on_raw_features(piped, kind):
    pipes, X = piped
    values, base = tree_shap(pipes[kind], X[:4])
    assert np.all(values[:, 2, :] == 0.0)  # dropped column
    for a in range(4):
        assert np.allclose(values[a], exact_shap(pipes[kind], X[a], TREE_CONDITIONAL), atol=1e-9)
    assert np.allclose(base + values.sum(axis=1), model_output(pipes[kind], X[:4]), atol=1e-9)


def test_explain_model_auto(piped):
    pipes, X = piped
    tree = explain_model(pipes["rforest"], X[:6])
    assert tree.method == "tree" and tree.additivity_error() <= 1e-9
    perm = explain_model(pipes["knn"], X[:6], background=X[::10], n_permutations=30, seed=2,
                         instances=[10, 11, 12, 13, 14, 15])
    assert perm.method == "permutation" and perm.additivity_error() <= 1e-9
    assert perm.instances == [10, 11, 12, 13, 14, 15]
    assert perm.feature_names == ["a", "b", "c", "d"]
    again = explain_model(pipes["knn"], X[:6], background=X[::10], n_permutations=30, seed=2,
                          instances=[10, 11, 12, 13, 14, 15])
    assert np.array_equal(perm.values, again.values)


def test_explain_model_errors(piped):
    pipes, X = piped
    with pytest.raises(ExplainError):
        explain_model(pipes["knn"], X[:2])  # no background
    with pytest.raises(ExplainError):
        explain_model(pipes["rforest"], X[:2], method="kernel")
    with pytest.raises(ExplainError):
        explain_model(pipes["rforest"], np.zeros((0, 4)))


def matrix(values, X=None):
    values = np.asarray(values, dtype=float)
    n, d, k = values.shape
    X = np.zeros((n, d)) if X is None else X
    base = np.full(k, 0.1)
    return ShapMatrix(values, base, [f"f{j}" for j in range(d)], X, base + values.sum(axis=1))


def test_summary_all_zero_index_order():
    s = shap_summary(matrix(np.zeros((4, 5, 3))))
    assert s.ranking == [[0, 1, 2, 3, 4]] * 3
    assert np.all(s.importance == 0)


def test_summary_single_feature_first():
    v = np.zeros((6, 4, 3))
    v[:, 2, :] = np.where(np.arange(6) % 2, 1.0, -1.0)[:, None]
    s = shap_summary(matrix(v))
    assert all(s.top(c, 1) == ["f2"] for c in range(3))
    assert s.overall_ranking[0] == 2
    bees = s.beeswarm(matrix(v), 0)
    assert len(bees) == 24 and bees[0][0] == "f2"


def test_summary_to_dict_sorted():
    rng = np.random.default_rng(0)
    s = shap_summary(matrix(rng.normal(size=(10, 5, 3))))
    for rows in s.to_dict()["per_category"]:
        vals = [r["mean_abs"] for r in rows]
        assert vals == sorted(vals, reverse=True)


def test_force_breakdown_dummy_model(blobs):
    X, y = blobs
    model = fit(ModelSpec("dummy"), X, y)
    shap = explain_model(model, X[:3], background=X[::7], n_permutations=10)
    fb = force_breakdown(shap, 1, 0)
    assert all(p == 0.0 for _, _, p in fb.contributions)
    assert fb.output == pytest.approx(fb.base)


def test_force_breakdown_sorted_and_additive():
    rng = np.random.default_rng(3)
    shap = matrix(rng.normal(size=(5, 6, 3)), X=rng.normal(size=(5, 6)))
    fb = force_breakdown(shap, 2, 1)
    phis = [p for _, _, p in fb.contributions]
    assert [abs(p) for p in phis] == sorted((abs(p) for p in phis), reverse=True)
    assert abs(fb.base + sum(phis) - fb.output) <= 1e-6
    d = fb.to_dict()
    assert d["instance"] == 2 and d["category"] == 1 and len(d["contributions"]) == 6


def test_force_breakdown_range():
    shap = matrix(np.zeros((2, 3, 3)))
    with pytest.raises(ExplainError):
        force_breakdown(shap, 2, 0)
    with pytest.raises(ExplainError):
        force_breakdown(shap, 0, 3)
