import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspq.errors import InvalidInput, ParseError, UnsupportedModelVersion
from graspq.learn import (DEFAULT_GRIDS, EvalReport, best_split, confusion_matrix, cross_validate,
                          evaluate, expand_grid, fit_model, gini, grid_search, knn_fit, knn_predict,
                          load_model, model_from_dict, model_to_dict, predict, save_model,
                          stratified_folds, tree_fit, tree_predict, zero_one_score)
from oracles import cv_loop, knn_bruteforce, root_split_exhaustive, weighted_gini_exact


def blobs(n, seed, n_classes=3, spread=0.05, dim=2):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % n_classes
    centres = rng.uniform(0, 1, size=(n_classes, dim))
    return centres[y] + rng.normal(scale=spread, size=(n, dim)), y


# -- zero-one score -------------------------------------------------------------

def test_zero_one_score():
    y = np.array([0, 1, 1, 0, 1, 0, 0, 1, 1, 0])
    assert zero_one_score(y, y) == 1.0
    assert zero_one_score(1 - y, y) == 0.0
    half = y.copy()
    half[:5] = 1 - half[:5]
    assert zero_one_score(half, y) == 0.5
    with pytest.raises(InvalidInput):
        zero_one_score([0, 1], [0])


# -- kNN -------------------------------------------------------------------------------

def test_knn_basic_cases():
    X, y = blobs(30, 0)
    m1 = knn_fit(X, y, 1)
    for i in range(30):
        assert knn_predict(m1, X[i]) == y[i]
    y_major = np.array([2] * 12 + [0] * 10 + [1] * 8)
    m_all = knn_fit(X, y_major, 30)
    assert set(knn_predict(m_all, np.random.default_rng(1).normal(size=(20, 2))).tolist()) == {2}
    with pytest.raises(InvalidInput):
        knn_fit(X, y, 31)
    with pytest.raises(InvalidInput):
        knn_fit(np.zeros((0, 2)), np.zeros(0, dtype=int), 1)
    with pytest.raises(InvalidInput):
        knn_predict(m1, [0.0, 0.0, 0.0])


@pytest.mark.parametrize("seed", range(20))
def test_knn_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(30, 3))
    y = rng.integers(0, 3, 30)
    m = knn_fit(X, y, 3)
    for q in rng.uniform(size=(10, 3)):
        assert knn_predict(m, q) == knn_bruteforce(X.tolist(), y.tolist(), q.tolist(), 3)


def test_knn_distance_ties_use_lower_row_index():
    X = np.array([[1.0], [-1.0], [2.0]])
    m = knn_fit(X, [1, 0, 0], 1)
    assert knn_predict(m, [0.0]) == 1
    m = knn_fit(X[[1, 0, 2]], [0, 1, 0], 1)
    assert knn_predict(m, [0.0]) == 0


def test_knn_vote_tie_rules():
    X = np.array([[0.0], [1.0], [3.0]])
    y = np.array([2, 1, 0])
    assert knn_predict(knn_fit(X, y, 2), [0.2]) == 1
    assert knn_predict(knn_fit(X, y, 2, tie_rule="nearest"), [0.2]) == 2
    with pytest.raises(InvalidInput):
        knn_fit(X, y, 2, tie_rule="random")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_knn_training_row_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(25, 2))
    y = rng.integers(0, 3, 25)
    perm = rng.permutation(25)
    q = rng.uniform(size=(10, 2))
    a = knn_predict(knn_fit(X, y, 5), q)
    b = knn_predict(knn_fit(X[perm], y[perm], 5), q)
    assert np.array_equal(a, b)


# -- trees ------------------------------------------------------------------------------

def test_gini():
    assert gini([5, 0]) == 0.0
    assert gini([2, 2]) == 0.5
    assert gini([0, 0]) == 0.0


def test_tree_root_split_simple():
    tree = tree_fit([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1])
    assert tree.feature[0] == 0 and tree.threshold[0] == 1.5
    assert root_split_exhaustive([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1]) == (0, 1.5)
    left, right = tree.left[0], tree.right[0]
    assert tree.counts[left] == [2, 0] and tree.counts[right] == [0, 2]
    assert tree.depth == 1


def test_tree_pure_and_single_row():
    tree = tree_fit(np.random.default_rng(0).normal(size=(10, 2)), [1] * 10)
    assert tree.feature == [-1] and tree.depth == 0
    assert tree_predict(tree, [0.3, 0.3]) == 1
    single = tree_fit([[1.0, 2.0]], [0])
    assert single.feature == [-1]


def test_tree_leaf_tie_goes_to_smallest_class():
    tree = tree_fit([[0.0], [0.0], [1.0], [1.0]], [1, 0, 0, 2], max_depth=1)
    assert tree_predict(tree, [0.0]) == 0
    assert tree_predict(tree, [1.0]) == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_root_split_matches_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    d = int(rng.integers(1, 4))
    # coarse grid values create many exact ties in both features and scores
    X = rng.integers(0, 6, size=(n, d)).astype(float) / 5
    y = rng.integers(0, 3, n)
    leaf = int(rng.integers(1, 4))
    expected = root_split_exhaustive(X, y.tolist(), leaf)
    got = best_split(X, y, 3, leaf)
    assert got == expected


def test_split_score_equals_exact_weighted_gini():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(40, 2))
    y = rng.integers(0, 3, 40)
    j, thr = best_split(X, y, 3)
    best = weighted_gini_exact(y[X[:, j] <= thr].tolist(), y[X[:, j] > thr].tolist())
    for jj in range(2):
        for t in np.unique(X[:, jj])[:-1]:
            assert weighted_gini_exact(y[X[:, jj] <= t].tolist(), y[X[:, jj] > t].tolist()) >= best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unlimited_tree_memorises_consistent_data(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(40, 3)).astype(float)
    y = rng.integers(0, 3, 40)
    # memorising oracle: the label first seen for each distinct row
    seen = {}
    for row, label in zip(map(tuple, X), y):
        seen.setdefault(row, label)
    y = np.array([seen[tuple(r)] for r in X])
    tree = tree_fit(X, y)
    assert zero_one_score(tree_predict(tree, X), y) == 1.0


@pytest.mark.parametrize("depth", [0, 1, 2, 3])
def test_tree_respects_depth_and_leaf_size(depth):
    X, y = blobs(60, 3)
    tree = tree_fit(X, y, max_depth=depth, min_samples_leaf=4)
    assert tree.depth <= depth
    leaves = [c for f, c in zip(tree.feature, tree.counts) if f == -1]
    assert all(sum(c) >= 4 for c in leaves)
    assert all(f < 2 for f in tree.feature)


def test_monotone_rescaling_differential():
    rng = np.random.default_rng(11)
    X = np.column_stack([rng.uniform(0.1, 1, 60), rng.uniform(0.1, 1, 60)])
    y = (X[:, 0] + X[:, 1] > 1.1).astype(int) + (X[:, 0] > 0.8).astype(int)
    # queries reuse training coordinates, mixed across rows: a midpoint threshold
    # is not mapped onto the warped midpoint, so values strictly inside a split
    # gap could fall on either side
    Q = np.column_stack([rng.choice(X[:, 0], 300), rng.choice(X[:, 1], 300)])

    def warp(a):
        b = a.copy()
        b[:, 0] = np.exp(8 * b[:, 0])
        return b

    tree = tree_fit(X, y)
    warped_tree = tree_fit(warp(X), y)
    assert warped_tree.feature == tree.feature and warped_tree.counts == tree.counts
    assert np.array_equal(tree_predict(tree, Q), tree_predict(warped_tree, warp(Q)))
    knn = knn_fit(X, y, 3)
    warped_knn = knn_fit(warp(X), y, 3)
    assert not np.array_equal(knn_predict(knn, Q), knn_predict(warped_knn, warp(Q)))


# -- cross validation and grid search -------------------------------------------------------

def test_folds_are_stratified_partition():
    y = np.array([0] * 12 + [1] * 9 + [2] * 4)
    folds = stratified_folds(y, 5, seed=3)
    assert sorted(np.concatenate(folds).tolist()) == list(range(25))
    assert [len(f) for f in folds] == [5] * 5
    for c in range(3):
        per = [int(np.sum(y[f] == c)) for f in folds]
        assert max(per) - min(per) <= 1
    assert all(np.array_equal(a, b) for a, b in zip(folds, stratified_folds(y, 5, seed=3)))
    with pytest.raises(InvalidInput):
        stratified_folds(y, 26, 0)
    with pytest.raises(InvalidInput):
        stratified_folds(y, 1, 0)


@pytest.mark.parametrize("spec", [{"kind": "knn", "k": 3}, {"kind": "tree", "max_depth": 2}])
def test_cross_validate_matches_loop_oracle(spec):
    X, y = blobs(25, 8, spread=0.3)
    got = cross_validate(X, y, 5, spec, seed=4)
    mean, std, scores = cv_loop(X, y, 5, 4, lambda a, b: fit_model(spec, a, b, 3),
                                lambda m, a: predict(m, a))
    assert got["scores"] == pytest.approx(scores, abs=1e-15)
    assert got["mean"] == pytest.approx(mean, abs=1e-15)
    assert got["std"] == pytest.approx(std, abs=1e-12)


def test_cross_validate_separable_and_chance():
    X, y = blobs(50, 2, n_classes=2, spread=0.001)
    res = cross_validate(X, y, 5, {"kind": "tree"}, seed=0)
    assert res == {"mean": 1.0, "std": 0.0, "scores": [1.0] * 5}
    y = np.array([0, 1] * 25)
    const = lambda a, b: (lambda q: np.zeros(len(q), dtype=int))
    assert cross_validate(X, y, 5, const, seed=0)["mean"] == pytest.approx(0.5)


def test_grid_search_selection_rule_with_injected_scores():
    X, y = blobs(30, 0)
    grid = expand_grid("knn", {"k": [1, 3, 5, 7]})
    fake = {1: 0.6, 3: 0.9, 5: 0.9, 7: 0.8}
    calls = []

    def cv(X_, y_, folds, cell, seed, n_classes=None):
        calls.append(cell["k"])
        return {"mean": fake[cell["k"]], "std": 0.01, "scores": []}

    best, model, report = grid_search(X, y, grid, folds=5, seed=0, cv=cv)
    assert calls == [1, 3, 5, 7]
    assert best == {"kind": "knn", "k": 3}
    assert model.k == 3
    assert (report.train_accuracy_mean, report.train_accuracy_std) == (0.9, 0.01)
    single, _, _ = grid_search(X, y, grid[-1:], cv=cv)
    assert single["k"] == 7
    with pytest.raises(InvalidInput):
        grid_search(X, y, [])


def test_grid_search_skips_unfittable_cells():
    X, y = blobs(10, 0)
    best, _, _ = grid_search(X, y, expand_grid("knn", {"k": [50, 1]}), folds=2)
    assert best["k"] == 1


def test_default_grids():
    assert [c["k"] for c in expand_grid("knn")] == [1, 3, 5, 7, 9, 11]
    cells = expand_grid("tree")
    assert len(cells) == 24 and cells[0] == {"kind": "tree", "max_depth": 2, "min_samples_leaf": 1}
    assert DEFAULT_GRIDS["tree"]["max_depth"][-1] is None


# -- evaluation and persistence -------------------------------------------------------------

def test_evaluate():
    X, y = blobs(20, 1, n_classes=2)
    model = tree_fit(X, np.zeros(20, dtype=int), n_classes=3)
    rep = evaluate(model, X, np.zeros(20, dtype=int))
    assert rep.test_accuracy == 1.0
    assert rep.confusion == [[20, 0, 0], [0, 0, 0], [0, 0, 0]]
    assert evaluate(model, X, np.ones(20, dtype=int)).test_accuracy == 0.0
    knn = knn_fit(X, y, 3)
    rep = evaluate(knn, X[:7], y[:7])
    assert rep.test_accuracy == zero_one_score(knn_predict(knn, X[:7]), y[:7])
    assert np.sum(rep.confusion, axis=1).tolist() == np.bincount(y[:7], minlength=2).tolist()
    with pytest.raises(InvalidInput):
        evaluate(knn, X[:, :1], y)
    cm = confusion_matrix([0, 1, 1], [0, 0, 1], 2)
    assert cm.tolist() == [[1, 1], [0, 1]]


def test_eval_report_dict_round_trip():
    rep = EvalReport("tree", {"max_depth": 3}, 0.8, 0.05, 5, 1, test_accuracy=0.7, confusion=[[1]])
    assert EvalReport.from_dict(json.loads(json.dumps(rep.to_dict()))) == rep


@pytest.mark.parametrize("spec", [{"kind": "knn", "k": 5}, {"kind": "tree", "max_depth": 4},
                                  {"kind": "tree", "max_depth": 0}])
def test_model_round_trip_predictions(tmp_path, spec):
    X, y = blobs(40, 6)
    model = fit_model(spec, X, y, 3)
    model.meta = {"feature_order": ["q_a1", "q_b1"], "label_encoding": {"Robust": 0},
                  "thresholds": {"q_a1": [0, 1]}, "provenance": {"seed": 1}}
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    Q = np.random.default_rng(0).uniform(-0.5, 1.5, size=(100, 2))
    assert np.array_equal(predict(back, Q), predict(model, Q))
    assert model_to_dict(back) == model_to_dict(model)


def test_corrupted_model_files(tmp_path):
    X, y = blobs(20, 0)
    d = model_to_dict(tree_fit(X, y))
    with pytest.raises(UnsupportedModelVersion):
        model_from_dict(dict(d, version=2))
    with pytest.raises(UnsupportedModelVersion):
        model_from_dict(dict(d, format="other"))
    with pytest.raises(UnsupportedModelVersion):
        model_from_dict(dict(d, kind="svm"))
    broken = json.loads(json.dumps(d))
    broken["parameters"]["left"] = broken["parameters"]["left"][:-1]
    with pytest.raises(ParseError):
        model_from_dict(broken)
    broken = json.loads(json.dumps(d))
    del broken["parameters"]["threshold"]
    with pytest.raises(ParseError):
        model_from_dict(broken)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d)[:50])
    with pytest.raises(ParseError):
        load_model(p)
