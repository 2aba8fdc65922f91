"""k-nearest-neighbour and classification-tree learners with CV and grid search.

Class labels are small non-negative integer codes.  All randomness comes
from ``numpy.random.default_rng(seed)`` so every procedure is reproducible.
"""
import itertools
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import InvalidInput, ParseError, UnsupportedModelVersion

MODEL_FORMAT = "graspq-model"
MODEL_VERSION = 1

DEFAULT_GRIDS = {
    "knn": {"k": [1, 3, 5, 7, 9, 11]},
    "tree": {"max_depth": [2, 3, 4, 5, 6, 8, 10, None], "min_samples_leaf": [1, 2, 5]},
}
STD_NOTE = "Train ± Std is the mean and population std of cross-validation fold accuracies"


def _check_xy(features, labels):
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels)
    if X.ndim != 2 or len(X) != len(y):
        raise InvalidInput(f"features {X.shape} and labels {y.shape} do not match")
    if len(X) == 0:
        raise InvalidInput("empty training set")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("features must be finite")
    if not np.issubdtype(y.dtype, np.integer) or np.any(y < 0):
        raise InvalidInput("labels must be non-negative integer class codes")
    return X, y.astype(int)


def _n_classes(y, n_classes):
    return int(max(n_classes or 0, int(y.max()) + 1))


def zero_one_score(predictions, labels):
    """Fraction of positions where prediction equals label."""
    p = np.asarray(predictions)
    t = np.asarray(labels)
    if p.shape != t.shape or p.ndim != 1:
        raise InvalidInput(f"prediction shape {p.shape} does not match label shape {t.shape}")
    if len(p) == 0:
        raise InvalidInput("cannot score empty predictions")
    return float(np.mean(p == t))


# -- k nearest neighbours ----------------------------------------------------------

@dataclass(eq=False)
class KnnModel:
    k: int
    X: np.ndarray
    y: np.ndarray
    n_classes: int
    tie_rule: str = "smallest"
    distance: str = "euclidean"
    meta: dict = field(default_factory=dict)

    kind = "knn"

    @property
    def hyperparameters(self):
        return {"k": self.k}

    @property
    def n_features(self):
        return self.X.shape[1]


def knn_fit(features, labels, k, tie_rule="smallest", n_classes=None):
    """Store the training set.  ``tie_rule`` is ``"smallest"`` (lowest class
    code wins a vote tie) or ``"nearest"`` (the tied class with the closest
    neighbour wins)."""
    X, y = _check_xy(features, labels)
    if not 1 <= k <= len(X):
        raise InvalidInput(f"k={k} must be between 1 and the {len(X)} training rows")
    if tie_rule not in ("smallest", "nearest"):
        raise InvalidInput(f"unknown tie rule {tie_rule!r}")
    return KnnModel(int(k), X.copy(), y.copy(), _n_classes(y, n_classes), tie_rule)


def _knn_one(model, x):
    d2 = np.sum((model.X - x) ** 2, axis=1)
    nearest = np.argsort(d2, kind="stable")[: model.k]
    votes = np.bincount(model.y[nearest], minlength=model.n_classes)
    winners = np.flatnonzero(votes == votes.max())
    if len(winners) == 1 or model.tie_rule == "smallest":
        return int(winners[0])
    for i in nearest:
        if model.y[i] in winners:
            return int(model.y[i])


def knn_predict(model, x):
    """Label for one query (1D) or an array of labels for a batch (2D)."""
    q = np.asarray(x, dtype=float)
    if q.shape[-1] != model.n_features:
        raise InvalidInput(f"query has {q.shape[-1]} features, model expects {model.n_features}")
    if q.ndim == 1:
        return _knn_one(model, q)
    return np.array([_knn_one(model, row) for row in q], dtype=int)


# -- classification tree -----------------------------------------------------------

@dataclass(eq=False)
class TreeModel:
    """Flat binary tree.  Node ``i`` is a leaf when ``feature[i] == -1``;
    otherwise samples with ``x[feature] <= threshold`` go to ``left[i]``."""

    feature: list
    threshold: list
    left: list
    right: list
    counts: list
    n_features: int
    n_classes: int
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    impurity: str = "gini"
    meta: dict = field(default_factory=dict)

    kind = "tree"

    @property
    def hyperparameters(self):
        return {"max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf}

    @property
    def depth(self):
        def walk(i):
            if self.feature[i] == -1:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)


def gini(counts):
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    return 1.0 - float(np.sum((counts / n) ** 2)) if n else 0.0


def best_split(X, y, n_classes, min_samples_leaf=1):
    """(feature, threshold) with the lowest weighted Gini impurity, or None.

    Weighted impurity is ``1 - (sum_c L_c^2 / n_L + sum_c R_c^2 / n_R) / n``, so
    the search maximises the bracketed score.  Near-ties in floating point are
    resolved exactly with integer arithmetic; exact ties go to the lower
    feature index, then the lower threshold.
    """
    n = len(y)
    onehot = np.eye(n_classes, dtype=np.int64)[y]
    total = onehot.sum(axis=0)
    best = None  # (score as Fraction, feature, threshold)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        n_left = np.arange(1, n)
        n_right = n - n_left
        valid = (xs[:-1] < xs[1:]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        if not valid.any():
            continue
        sq_left = np.sum(left**2, axis=1)
        sq_right = np.sum((total - left) ** 2, axis=1)
        score = np.where(valid, sq_left / n_left + sq_right / n_right, -np.inf)
        top = score.max()
        near = np.flatnonzero(valid & (score >= top - 1e-9 * abs(top)))
        feature_best = None
        for i in near:
            exact = Fraction(int(sq_left[i]), int(n_left[i])) + Fraction(int(sq_right[i]), int(n_right[i]))
            if feature_best is None or exact > feature_best[0]:
                feature_best = (exact, i)
        exact, i = feature_best
        if best is None or exact > best[0]:
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not xs[i] <= thr < xs[i + 1]:
                thr = xs[i]
            best = (exact, j, float(thr))
    if best is None:
        return None
    return best[1], best[2]


def tree_fit(features, labels, max_depth=None, min_samples_leaf=1, n_classes=None):
    """Greedy CART with Gini impurity.

    A node becomes a leaf when it is pure, at ``max_depth``, or when no split
    leaves ``min_samples_leaf`` samples on both sides.
    """
    X, y = _check_xy(features, labels)
    if max_depth is not None and max_depth < 0:
        raise InvalidInput("max_depth must be >= 0 or None")
    if min_samples_leaf < 1:
        raise InvalidInput("min_samples_leaf must be >= 1")
    k = _n_classes(y, n_classes)
    tree = TreeModel([], [], [], [], [], X.shape[1], k, max_depth, int(min_samples_leaf))

    def grow(idx, depth):
        node = len(tree.feature)
        counts = np.bincount(y[idx], minlength=k)
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.counts.append(counts.tolist())
        if np.count_nonzero(counts) <= 1 or (max_depth is not None and depth >= max_depth):
            return node
        split = best_split(X[idx], y[idx], k, min_samples_leaf)
        if split is None:
            return node
        j, thr = split
        go_left = X[idx, j] <= thr
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = grow(idx[go_left], depth + 1)
        tree.right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return tree


def _tree_one(model, x):
    i = 0
    while model.feature[i] != -1:
        i = model.left[i] if x[model.feature[i]] <= model.threshold[i] else model.right[i]
    return int(np.argmax(model.counts[i]))


def tree_predict(model, x):
    q = np.asarray(x, dtype=float)
    if q.shape[-1] != model.n_features:
        raise InvalidInput(f"query has {q.shape[-1]} features, model expects {model.n_features}")
    if q.ndim == 1:
        return _tree_one(model, q)
    return np.array([_tree_one(model, row) for row in q], dtype=int)


# -- generic fit/predict -------------------------------------------------------------

def fit_model(spec, features, labels, n_classes=None):
    """Fit from a spec dict such as ``{"kind": "knn", "k": 3}``.

    A callable spec is called as ``spec(features, labels)`` and must return a
    predictor callable; this lets tests plug in baseline models.
    """
    if callable(spec):
        return spec(features, labels)
    params = {k: v for k, v in spec.items() if k != "kind"}
    if spec["kind"] == "knn":
        return knn_fit(features, labels, n_classes=n_classes, **params)
    if spec["kind"] == "tree":
        return tree_fit(features, labels, n_classes=n_classes, **params)
    raise InvalidInput(f"unknown model kind {spec['kind']!r}")


def predict(model, features):
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if callable(model):
        return np.asarray(model(X), dtype=int)
    if model.kind == "knn":
        return knn_predict(model, X)
    return tree_predict(model, X)


def expand_grid(kind, params=None):
    """Cartesian product of hyperparameter lists, in a fixed order."""
    params = DEFAULT_GRIDS[kind] if params is None else params
    keys = list(params)
    return [dict(kind=kind, **dict(zip(keys, values)))
            for values in itertools.product(*(params[k] for k in keys))]


def stratified_folds(labels, folds, seed):
    """Test-index arrays for a shuffled, stratified k-fold partition.

    Each class is shuffled, classes are concatenated in code order and dealt
    round-robin, so fold sizes and per-class counts differ by at most one.
    """
    y = np.asarray(labels)
    if folds < 2:
        raise InvalidInput("need at least 2 folds")
    if folds > len(y):
        raise InvalidInput(f"{folds} folds requested for {len(y)} rows")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in np.unique(y)])
    assignment = np.empty(len(y), dtype=int)
    assignment[order] = np.arange(len(y)) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def cross_validate(features, labels, folds, model_spec, seed, n_classes=None):
    """Per-fold accuracies with their mean and population std."""
    X, y = _check_xy(features, labels)
    n_classes = _n_classes(y, n_classes)
    scores = []
    for test_idx in stratified_folds(y, folds, seed):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        model = fit_model(model_spec, X[mask], y[mask], n_classes)
        scores.append(zero_one_score(predict(model, X[test_idx]), y[test_idx]))
    scores = np.array(scores)
    return {"mean": float(scores.mean()), "std": float(scores.std()), "scores": scores.tolist()}


@dataclass
class EvalReport:
    model_kind: str
    hyperparameters: dict
    train_accuracy_mean: float
    train_accuracy_std: float
    folds: int
    seed: int
    test_accuracy: Optional[float] = None
    confusion: Optional[list] = None  # rows: true class, columns: predicted
    label_scheme: Optional[str] = None
    class_names: Optional[list] = None
    metrics: Optional[list] = None
    n_train: Optional[int] = None
    n_test: Optional[int] = None
    split_mode: Optional[str] = None
    note: str = STD_NOTE

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def grid_search(features, labels, grid, folds=5, seed=0, n_classes=None, cv=cross_validate):
    """Cross-validate every cell of ``grid`` and refit the best on all rows.

    The highest mean CV accuracy wins; ties keep the earliest cell.  Cells
    that cannot be fitted (e.g. k larger than a training fold) are skipped.

    Returns
    -------
    best : dict
        The winning grid cell.
    model
        The winner refitted on all of ``features``.
    report : EvalReport
        CV mean/std of the winner; test fields are left empty.
    """
    if not grid:
        raise InvalidInput("empty hyperparameter grid")
    X, y = _check_xy(features, labels)
    n_classes = _n_classes(y, n_classes)
    best = None
    for cell in grid:
        try:
            result = cv(X, y, folds, cell, seed, n_classes=n_classes)
        except InvalidInput:
            continue
        if best is None or result["mean"] > best[1]["mean"]:
            best = (cell, result)
    if best is None:
        raise InvalidInput("no grid cell could be evaluated")
    cell, result = best
    model = fit_model(cell, X, y, n_classes)
    report = EvalReport(model_kind=cell["kind"] if isinstance(cell, dict) else "custom",
                        hyperparameters={k: v for k, v in cell.items() if k != "kind"},
                        train_accuracy_mean=result["mean"], train_accuracy_std=result["std"],
                        folds=folds, seed=seed, n_train=len(y))
    return cell, model, report


def confusion_matrix(predictions, labels, n_classes):
    m = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(m, (np.asarray(labels, dtype=int), np.asarray(predictions, dtype=int)), 1)
    return m


def evaluate(model, features, labels, report=None):
    """Test accuracy and confusion matrix, merged into ``report`` when given."""
    X, y = _check_xy(features, labels)
    if X.shape[1] != model.n_features:
        raise InvalidInput(f"test set has {X.shape[1]} features, model expects {model.n_features}")
    pred = predict(model, X)
    n_classes = max(model.n_classes, int(y.max()) + 1)
    if report is None:
        report = EvalReport(model.kind, model.hyperparameters, None, None, 0, 0)
    report.test_accuracy = zero_one_score(pred, y)
    report.confusion = confusion_matrix(pred, y, n_classes).tolist()
    report.n_test = len(y)
    return report


# -- persistence ------------------------------------------------------------------------

def model_to_dict(model):
    if model.kind == "knn":
        params = {"X": model.X.tolist(), "y": model.y.tolist(), "n_classes": model.n_classes,
                  "tie_rule": model.tie_rule, "distance": model.distance}
    else:
        params = {"feature": model.feature, "threshold": model.threshold, "left": model.left,
                  "right": model.right, "counts": model.counts, "n_features": model.n_features,
                  "n_classes": model.n_classes, "impurity": model.impurity}
    meta = model.meta
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "hyperparameters": model.hyperparameters,
        "parameters": params,
        "feature_order": meta.get("feature_order"),
        "label_encoding": meta.get("label_encoding"),
        "label_scheme": meta.get("label_scheme"),
        "thresholds": meta.get("thresholds"),
        "provenance": meta.get("provenance", {}),
    }


def model_from_dict(d):
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise UnsupportedModelVersion("not a graspq model file")
    if d.get("version") != MODEL_VERSION:
        raise UnsupportedModelVersion(f"model version {d.get('version')!r}, expected {MODEL_VERSION}")
    meta = {k: d.get(k) for k in ("feature_order", "label_encoding", "label_scheme", "thresholds")}
    meta["provenance"] = d.get("provenance", {})
    try:
        p, hp = d["parameters"], d["hyperparameters"]
        if d["kind"] == "knn":
            X = np.array(p["X"], dtype=float)
            model = KnnModel(int(hp["k"]), X.reshape(len(p["y"]), -1), np.array(p["y"], dtype=int),
                             int(p["n_classes"]), p["tie_rule"], p["distance"], meta)
        elif d["kind"] == "tree":
            model = TreeModel(list(p["feature"]), [float(t) for t in p["threshold"]], list(p["left"]),
                              list(p["right"]), [list(c) for c in p["counts"]], int(p["n_features"]),
                              int(p["n_classes"]), hp["max_depth"], int(hp["min_samples_leaf"]),
                              p["impurity"], meta)
            n = len(model.feature)
            if n == 0 or not all(len(v) == n for v in (model.threshold, model.left, model.right, model.counts)):
                raise ValueError("inconsistent tree arrays")
        else:
            raise UnsupportedModelVersion(f"unknown model kind {d['kind']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model parameters: {exc}") from None
    return model


def save_model(model, path):
    from .datapipe import atomic_write_text
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid model JSON: {exc.msg}", exc.lineno) from None
    return model_from_dict(d)
