"""Four classifiers behind one train/predict contract: k-nearest
neighbors, Gaussian naive Bayes, a threshold-split decision tree, and a
one-vs-rest linear SVM trained by seeded stochastic subgradient descent.

Prediction ties are always broken by the fixed label order
meme < sticker < no_meme so confusion matrices are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .corpus import CLASS_LABELS, FeatureVector, LabeledDataset
from .errors import DataError, DimensionMismatchError, EmptyClassError

KINDS = ("knn", "naive_bayes", "decision_tree", "linear_svm")

DEFAULT_HYPERPARAMETERS = {
    "knn": {"k": 5},
    "naive_bayes": {"var_smoothing": 1e-9},
    "decision_tree": {"max_depth": 20, "min_samples_leaf": 1},
    "linear_svm": {"regularization": 1e-4, "epochs": 50, "learning_rate": 1.0},
}

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = rng.DEFAULT_SEED

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown classifier kind {self.kind!r}")
        params = dict(DEFAULT_HYPERPARAMETERS[self.kind])
        unknown = set(self.hyperparameters) - set(params)
        if unknown:
            raise DataError(f"unknown hyperparameters for {self.kind}: {sorted(unknown)}")
        params.update(self.hyperparameters)
        _validate_hyperparameters(self.kind, params)
        object.__setattr__(self, "hyperparameters", params)


def _validate_hyperparameters(kind, p):
    if kind == "knn" and (not isinstance(p["k"], int) or p["k"] < 1):
        raise DataError("knn requires integer k >= 1")
    if kind == "naive_bayes" and p["var_smoothing"] <= 0:
        raise DataError("var_smoothing must be positive")
    if kind == "decision_tree":
        if p["max_depth"] < 1 or p["min_samples_leaf"] < 1:
            raise DataError("max_depth and min_samples_leaf must be >= 1")
    if kind == "linear_svm":
        if p["regularization"] <= 0 or p["epochs"] < 1 or p["learning_rate"] <= 0:
            raise DataError("linear_svm needs positive regularization, epochs, learning_rate")


def _as_values(x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _label_rank(label):
    return CLASS_LABELS.index(label)


class TrainedClassifier:
    """Immutable trained model.  `predict` returns the argmax of
    `predict_scores` under the global label-order tie-break."""

    kind: str

    def __init__(self, labels, input_dim, hyperparameters):
        # labels kept in global order so tie-breaks are positional
        self.labels = tuple(sorted(labels, key=_label_rank))
        self.input_dim = int(input_dim)
        self.hyperparameters = dict(hyperparameters)

    def _check(self, x) -> np.ndarray:
        v = _as_values(x)
        if v.shape != (self.input_dim,):
            raise DimensionMismatchError(
                f"expected dimension {self.input_dim}, got {v.shape}"
            )
        return v

    def predict_scores(self, x) -> dict:
        raise NotImplementedError

    def predict(self, x) -> str:
        scores = self.predict_scores(x)
        best = max(self.labels, key=lambda l: (scores[l], -_label_rank(l)))
        return best

    def _params_dict(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "labels": list(self.labels),
            "input_dim": self.input_dim,
            "hyperparameters": self.hyperparameters,
            "params": self._params_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class KnnClassifier(TrainedClassifier):
    kind = "knn"

    def __init__(self, labels, input_dim, hyperparameters, X, y):
        super().__init__(labels, input_dim, hyperparameters)
        self.X = np.asarray(X, dtype=np.float64)
        self.y = list(y)

    def predict_scores(self, x):
        v = self._check(x)
        distances = np.sqrt(np.sum((self.X - v) ** 2, axis=1))
        # stable sort: distance ties go to the lower sample index
        order = np.argsort(distances, kind="stable")
        k = min(self.hyperparameters["k"], len(self.y))
        votes = {label: 0 for label in self.labels}
        for i in order[:k]:
            votes[self.y[i]] += 1
        return {label: votes[label] / k for label in self.labels}

    def _params_dict(self):
        return {"X": self.X.tolist(), "y": self.y}


class NaiveBayesClassifier(TrainedClassifier):
    kind = "naive_bayes"

    def __init__(self, labels, input_dim, hyperparameters, means, variances, log_priors):
        super().__init__(labels, input_dim, hyperparameters)
        self.means = {l: np.asarray(means[l], dtype=np.float64) for l in self.labels}
        self.variances = {l: np.asarray(variances[l], dtype=np.float64) for l in self.labels}
        self.log_priors = {l: float(log_priors[l]) for l in self.labels}

    def predict_scores(self, x):
        v = self._check(x)
        scores = {}
        for label in self.labels:
            var = self.variances[label]
            diff = v - self.means[label]
            log_lik = -0.5 * np.sum(np.log(2 * np.pi * var) + diff * diff / var)
            scores[label] = float(self.log_priors[label] + log_lik)
        return scores

    def _params_dict(self):
        return {
            "means": {l: self.means[l].tolist() for l in self.labels},
            "variances": {l: self.variances[l].tolist() for l in self.labels},
            "log_priors": self.log_priors,
        }


class DecisionTreeClassifier(TrainedClassifier):
    kind = "decision_tree"

    def __init__(self, labels, input_dim, hyperparameters, nodes):
        super().__init__(labels, input_dim, hyperparameters)
        # nodes: list of dicts; leaves carry per-class fractions,
        # internal nodes carry (feature, threshold, left, right)
        self.nodes = nodes

    def predict_scores(self, x):
        v = self._check(x)
        node = self.nodes[0]
        while "feature" in node:
            node = self.nodes[node["left"] if v[node["feature"]] <= node["threshold"] else node["right"]]
        return {label: node["fractions"].get(label, 0.0) for label in self.labels}

    def _params_dict(self):
        return {"nodes": self.nodes}


class LinearSvmClassifier(TrainedClassifier):
    kind = "linear_svm"

    def __init__(self, labels, input_dim, hyperparameters, weights, biases, objective_history=()):
        super().__init__(labels, input_dim, hyperparameters)
        self.weights = np.asarray(weights, dtype=np.float64)  # (n_labels, input_dim)
        self.biases = np.asarray(biases, dtype=np.float64)
        self.objective_history = tuple(objective_history)

    def predict_scores(self, x):
        v = self._check(x)
        raw = self.weights @ v + self.biases
        return {label: float(raw[i]) for i, label in enumerate(self.labels)}

    def _params_dict(self):
        return {"weights": self.weights.tolist(), "biases": self.biases.tolist()}


def _gini(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - np.sum(p * p)


def _best_split(X, y_idx, n_classes, min_leaf):
    """Exhaustive threshold search over midpoints of sorted unique values.
    Returns (feature, threshold, weighted child impurity) or None."""
    n = len(y_idx)
    best = None
    for feature in range(X.shape[1]):
        col = X[:, feature]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        sorted_y = y_idx[order]
        # prefix class counts after each potential left side of size i+1
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), sorted_y] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        total = prefix[-1]
        # split allowed between positions i and i+1 where values differ
        boundary = np.nonzero(sorted_vals[:-1] < sorted_vals[1:])[0]
        if boundary.size == 0:
            continue
        left_n = boundary + 1
        right_n = n - left_n
        valid = (left_n >= min_leaf) & (right_n >= min_leaf)
        if not np.any(valid):
            continue
        boundary = boundary[valid]
        left_n = left_n[valid]
        right_n = right_n[valid]
        left_counts = prefix[boundary]
        right_counts = total - left_counts
        gini_l = 1.0 - np.sum((left_counts / left_n[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right_counts / right_n[:, None]) ** 2, axis=1)
        weighted = (left_n * gini_l + right_n * gini_r) / n
        i = int(np.argmin(weighted))
        candidate = (
            weighted[i],
            feature,
            0.5 * (sorted_vals[boundary[i]] + sorted_vals[boundary[i] + 1]),
        )
        if best is None or candidate[0] < best[0] - 1e-15:
            best = candidate
    return best


def _grow_tree(X, y_idx, labels, max_depth, min_leaf):
    nodes = []

    def leaf(idx):
        counts = np.bincount(y_idx[idx], minlength=len(labels))
        fractions = {labels[i]: float(c / counts.sum()) for i, c in enumerate(counts)}
        nodes.append({"fractions": fractions, "n": int(counts.sum())})
        return len(nodes) - 1

    def grow(idx, depth):
        counts = np.bincount(y_idx[idx], minlength=len(labels))
        impurity = _gini(counts)
        if depth >= max_depth or impurity == 0.0 or len(idx) < 2 * min_leaf:
            return leaf(idx)
        split = _best_split(X[idx], y_idx[idx], len(labels), min_leaf)
        if split is None or split[0] >= impurity - 1e-15:
            return leaf(idx)
        _, feature, threshold = split
        mask = X[idx, feature] <= threshold
        node_pos = len(nodes)
        nodes.append({"feature": int(feature), "threshold": float(threshold), "left": -1, "right": -1})
        nodes[node_pos]["left"] = grow(idx[mask], depth + 1)
        nodes[node_pos]["right"] = grow(idx[~mask], depth + 1)
        return node_pos

    grow(np.arange(len(y_idx)), 0)
    return nodes


def _svm_objective(W, b, X, Y, lam):
    margins = Y * (X @ W.T + b)
    hinge = np.maximum(0.0, 1.0 - margins).sum(axis=1).mean()
    return hinge + 0.5 * lam * float(np.sum(W * W))


def _train_linear_svm(X, y_idx, labels, params, seed):
    n, dim = X.shape
    n_labels = len(labels)
    lam = params["regularization"]
    lr0 = params["learning_rate"]
    Y = -np.ones((n, n_labels))
    Y[np.arange(n), y_idx] = 1.0
    W = np.zeros((n_labels, dim))
    b = np.zeros(n_labels)
    gen = rng.stream(seed, "svm")
    t = 0
    history = []
    for _ in range(params["epochs"]):
        order = gen.permutation(n)
        for i in order:
            t += 1
            # decaying 1/(lambda*t) schedule shifted by 1/lambda so early
            # steps stay bounded (eta_1 ~ lr0 instead of lr0/lambda)
            eta = lr0 / (1.0 + lr0 * lam * t)
            violated = Y[i] * (W @ X[i] + b) < 1.0
            W *= 1.0 - eta * lam
            if np.any(violated):
                W[violated] += eta * Y[i, violated, None] * X[i]
                b[violated] += eta * Y[i, violated]
        history.append(_svm_objective(W, b, X, Y, lam))
    return W, b, history


def train(spec: ClassifierSpec, data: LabeledDataset) -> TrainedClassifier:
    if not data.samples:
        raise EmptyClassError("no training samples")
    dims = {fv.dimension for fv, _ in data.samples}
    if len(dims) != 1:
        raise DimensionMismatchError(f"inconsistent feature dimensions: {sorted(dims)}")
    X, y = data.matrix()
    labels = tuple(sorted(set(y), key=_label_rank))
    for label in labels:
        if data.class_counts.get(label, 0) < 1:
            raise EmptyClassError(f"class {label!r} has no samples")
    label_index = {l: i for i, l in enumerate(labels)}
    y_idx = np.array([label_index[l] for l in y])
    dim = X.shape[1]
    p = spec.hyperparameters

    if spec.kind == "knn":
        return KnnClassifier(labels, dim, p, X, y)

    if spec.kind == "naive_bayes":
        means, variances, log_priors = {}, {}, {}
        global_var = X.var(axis=0).max()
        smoothing = p["var_smoothing"] * (global_var if global_var > 0 else 1.0)
        for label in labels:
            rows = X[y_idx == label_index[label]]
            means[label] = rows.mean(axis=0)
            variances[label] = rows.var(axis=0) + smoothing
            log_priors[label] = np.log(len(rows) / len(X))
        return NaiveBayesClassifier(labels, dim, p, means, variances, log_priors)

    if spec.kind == "decision_tree":
        nodes = _grow_tree(X, y_idx, labels, p["max_depth"], p["min_samples_leaf"])
        return DecisionTreeClassifier(labels, dim, p, nodes)

    W, b, history = _train_linear_svm(X, y_idx, labels, p, spec.seed)
    return LinearSvmClassifier(labels, dim, p, W, b, history)


def from_dict(doc: dict) -> TrainedClassifier:
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('format_version')!r}")
    kind = doc["kind"]
    labels = tuple(doc["labels"])
    dim = doc["input_dim"]
    params = doc["hyperparameters"]
    learned = doc["params"]
    if kind == "knn":
        return KnnClassifier(labels, dim, params, learned["X"], learned["y"])
    if kind == "naive_bayes":
        return NaiveBayesClassifier(
            labels, dim, params, learned["means"], learned["variances"], learned["log_priors"]
        )
    if kind == "decision_tree":
        return DecisionTreeClassifier(labels, dim, params, learned["nodes"])
    if kind == "linear_svm":
        return LinearSvmClassifier(labels, dim, params, learned["weights"], learned["biases"])
    raise DataError(f"unknown classifier kind {kind!r}")


def from_json(text: str) -> TrainedClassifier:
    return from_dict(json.loads(text))
