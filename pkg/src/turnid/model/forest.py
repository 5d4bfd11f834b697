"""Random forest of Gini decision trees, built from scratch.

Each tree grows on a bootstrap resample drawn from its own RNG stream keyed
by (seed, tree index), so training is bit-reproducible regardless of how
many worker threads run. Splits pick the threshold with the largest Gini
impurity decrease over a freshly drawn feature subset; candidate thresholds
are midpoints between consecutive distinct sorted values. All ties break
deterministically (lowest threshold position, then subset order; label ties
go to the lexicographically smallest label).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .._parallel import ordered_map
from ..features import PcaModel, feature_names as default_feature_names
from ..signals import COLUMNS

__all__ = ["ForestParams", "ForestModel", "train_forest", "predict",
           "predict_batch", "feature_importance", "sensor_importance",
           "save_model", "load_model", "model_to_dict", "model_from_dict"]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    features_per_split: int | None = None  # None -> ceil(sqrt(F))
    max_depth: int | None = None
    min_samples_leaf: int = 1
    seed: int = 0


@dataclass
class _Tree:
    feature: list[int] = field(default_factory=list)    # -1 marks a leaf
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[list[int]] = field(default_factory=list)

    def add_node(self, counts: np.ndarray) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append([int(c) for c in counts])
        return len(self.feature) - 1

    def leaf_class(self, node: int) -> int:
        return int(np.argmax(self.counts[node]))  # first max = smallest label

    def apply(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node


@dataclass
class ForestModel:
    params: ForestParams
    labels: list[str]          # sorted
    trees: list[_Tree]
    importances: np.ndarray    # (F,), sums to 1 when any split exists
    n_features: int
    pca: PcaModel | None = None


def _best_split(xs: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Best (position, column, threshold, child impurity) over the subset.

    ``xs`` is the node's samples restricted to the drawn feature columns.
    Returns None when no threshold separates the samples.
    """
    n, m = xs.shape
    order = np.argsort(xs, axis=0, kind="stable")
    sv = np.take_along_axis(xs, order, axis=0)
    sy = y[order]                                              # (n, m)
    onehot = (sy[:, :, None] == np.arange(n_classes)).astype(float)
    cum = np.cumsum(onehot, axis=0)                            # (n, m, C)
    total = cum[-1]                                            # (m, C)

    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    c_left = cum[:-1]
    c_right = total[None, :, :] - c_left
    gini_left = 1.0 - np.sum((c_left / n_left[:, :, None]) ** 2, axis=2)
    gini_right = 1.0 - np.sum((c_right / n_right[:, :, None]) ** 2, axis=2)
    child = (n_left * gini_left + n_right * gini_right) / n

    valid = (sv[1:] > sv[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    child = np.where(valid, child, np.inf)
    flat = int(np.argmin(child))
    pos, col = divmod(flat, m)
    if not np.isfinite(child[pos, col]):
        return None
    threshold = (sv[pos, col] + sv[pos + 1, col]) / 2.0
    if not (sv[pos, col] < threshold < sv[pos + 1, col]):
        return None  # adjacent floats left no room for a strict midpoint
    return pos, col, float(threshold), float(child[pos, col])


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


def _grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int,
               rng: np.random.Generator, params: ForestParams,
               m_try: int, importances: np.ndarray) -> _Tree:
    n_root = len(y)
    tree = _Tree()
    root = tree.add_node(np.bincount(y, minlength=n_classes))
    stack = [(root, np.arange(n_root), 0)]
    n_features = x.shape[1]

    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes)
        parent_gini = _gini(counts)
        if (parent_gini == 0.0
                or len(idx) < max(2, 2 * params.min_samples_leaf)
                or (params.max_depth is not None and depth >= params.max_depth)):
            continue
        feats = rng.choice(n_features, size=m_try, replace=False)
        found = _best_split(x[np.ix_(idx, feats)], y[idx], n_classes,
                            params.min_samples_leaf)
        if found is None:
            continue
        _, col, threshold, child_gini = found
        feat = int(feats[col])
        decrease = parent_gini - child_gini
        if decrease <= 1e-12:
            continue
        importances[feat] += (len(idx) / n_root) * decrease

        go_left = x[idx, feat] <= threshold
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        left_id = tree.add_node(np.bincount(y[left_idx], minlength=n_classes))
        right_id = tree.add_node(np.bincount(y[right_idx], minlength=n_classes))
        tree.feature[node] = feat
        tree.threshold[node] = threshold
        tree.left[node] = left_id
        tree.right[node] = right_id
        # right first so the left child is processed first (fixed DFS order)
        stack.append((right_id, right_idx, depth + 1))
        stack.append((left_id, left_idx, depth + 1))
    return tree


def train_forest(x, y, params: ForestParams = ForestParams(),
                 threads: int = 1) -> ForestModel:
    """Grow the forest. Deterministic given (data order, params)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("training needs at least 2 samples")
    labels = sorted(set(y))
    if len(labels) < 2:
        raise ValueError("training data contains a single class; "
                         "at least 2 drivers are required")
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if params.seed < 0:
        raise ValueError("seed must be non-negative")
    code = {label: i for i, label in enumerate(labels)}
    y_codes = np.array([code[v] for v in y], dtype=np.intp)
    n, n_features = x.shape
    m_try = params.features_per_split or math.ceil(math.sqrt(n_features))
    if not 1 <= m_try <= n_features:
        raise ValueError(f"features_per_split must be in [1, {n_features}]")

    def build(t: int) -> tuple[_Tree, np.ndarray]:
        rng = np.random.default_rng([params.seed, t])
        bag = rng.integers(0, n, size=n)
        imp = np.zeros(n_features)
        tree = _grow_tree(x[bag], y_codes[bag], len(labels), rng, params,
                          m_try, imp)
        return tree, imp

    results = ordered_map(build, range(params.n_trees), threads)
    trees = [r[0] for r in results]
    total = np.mean([r[1] for r in results], axis=0)
    s = total.sum()
    importances = total / s if s > 0 else np.zeros(n_features)
    return ForestModel(params=replace(params, features_per_split=m_try),
                       labels=labels, trees=trees, importances=importances,
                       n_features=n_features)


def predict(model: ForestModel, vector) -> tuple[str, dict[str, float]]:
    """Majority vote over the trees; returns (label, vote fractions)."""
    x = np.asarray(vector, dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected a vector of length {model.n_features}, "
                         f"got shape {x.shape}")
    votes = np.zeros(len(model.labels))
    for tree in model.trees:
        votes[tree.leaf_class(tree.apply(x))] += 1
    winner = model.labels[int(np.argmax(votes))]
    fractions = {label: float(v / len(model.trees))
                 for label, v in zip(model.labels, votes)}
    return winner, fractions


def predict_batch(model: ForestModel, x) -> list[str]:
    return [predict(model, row)[0] for row in np.asarray(x, dtype=float)]


def feature_importance(model: ForestModel,
                       names: list[str] | None = None) -> list[tuple[str, float]]:
    """Features ranked by normalized mean Gini impurity decrease."""
    if names is None:
        if model.n_features == len(default_feature_names()):
            names = default_feature_names()
        else:
            names = [f"f{i}" for i in range(model.n_features)]
    ranked = sorted(zip(names, model.importances), key=lambda p: -p[1])
    return [(name, float(w)) for name, w in ranked]


def sensor_importance(model: ForestModel) -> list[tuple[str, float]]:
    """Per-sensor importance: the sum over each sensor's feature block."""
    if model.n_features % len(COLUMNS):
        raise ValueError("model features do not divide into sensor blocks")
    per = model.n_features // len(COLUMNS)
    sums = model.importances.reshape(len(COLUMNS), per).sum(axis=1)
    ranked = sorted(zip(COLUMNS, sums), key=lambda p: -p[1])
    return [(name, float(w)) for name, w in ranked]


# -- serialization -----------------------------------------------------------

def model_to_dict(model: ForestModel) -> dict:
    p = model.params
    return {
        "version": 1,
        "params": {
            "n_trees": p.n_trees,
            "features_per_split": p.features_per_split,
            "max_depth": p.max_depth,
            "min_samples_leaf": p.min_samples_leaf,
            "seed": p.seed,
            "n_features": model.n_features,
        },
        "labels": list(model.labels),
        "pca": model.pca.to_dict() if model.pca is not None else None,
        "trees": [{
            "feature": t.feature,
            "threshold": t.threshold,
            "left": t.left,
            "right": t.right,
            "counts": t.counts,
        } for t in model.trees],
        "importances": model.importances.tolist(),
    }


def model_from_dict(data: dict) -> ForestModel:
    if data.get("version") != 1:
        raise ValueError(f"unsupported model version {data.get('version')!r}")
    p = data["params"]
    params = ForestParams(
        n_trees=int(p["n_trees"]),
        features_per_split=p["features_per_split"],
        max_depth=p["max_depth"],
        min_samples_leaf=int(p["min_samples_leaf"]),
        seed=int(p["seed"]),
    )
    trees = [_Tree(feature=[int(v) for v in t["feature"]],
                   threshold=[float(v) for v in t["threshold"]],
                   left=[int(v) for v in t["left"]],
                   right=[int(v) for v in t["right"]],
                   counts=[[int(c) for c in row] for row in t["counts"]])
             for t in data["trees"]]
    pca = PcaModel.from_dict(data["pca"]) if data.get("pca") else None
    return ForestModel(params=params,
                       labels=[str(v) for v in data["labels"]],
                       trees=trees,
                       importances=np.array(data["importances"], dtype=float),
                       n_features=int(p["n_features"]),
                       pca=pca)


def save_model(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")))


def load_model(path: str | Path) -> ForestModel:
    return model_from_dict(json.loads(Path(path).read_text()))
