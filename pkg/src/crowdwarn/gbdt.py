"""Gradient-boosted regression trees with squared-error loss.

Each tree is grown greedily on the current residuals ``y - F(x)``. A node
is split on the (feature, threshold) pair with the largest reduction in
sum of squared residuals; rows with ``x[f] <= threshold`` go left. Leaves
hold the mean residual of their rows, and the model predicts

    F(x) = base_prediction + learning_rate * sum_k tree_k(x)

Candidate thresholds are midpoints between consecutive distinct values of
a feature within the node. When a feature has more than
``max_thresholds_per_feature + 1`` distinct values, that many
quantile-spaced distinct values are used instead. Equal gains resolve to
the lower feature index, then the lower threshold.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from . import _jsonio
from .errors import ParameterError, ShapeError, TrainingError
from .features import FeatureTable, as_table
from .series import format_hour

# splits whose exact SSE reduction is below this fraction of the node SSE are noise
_MIN_REL_GAIN = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 200
    max_depth: int = 3
    min_leaf: int = 5
    learning_rate: float = 0.1
    max_thresholds_per_feature: int = 32
    subsample: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1 or self.max_thresholds_per_feature < 1:
            raise ParameterError(f"integer hyperparameters must be >= 1: {self}")
        if not 0 < self.learning_rate <= 1:
            raise ParameterError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if not 0 < self.subsample <= 1:
            raise ParameterError(f"subsample must be in (0, 1], got {self.subsample}")


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: int = 0


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    gain: float = 0.0
    n_samples: int = 0


TreeNode = Union[Leaf, Split]


def tree_value(node: TreeNode, x) -> float:
    while isinstance(node, Split):
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.value


def _tree_values(node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, Leaf):
        out[idx] = node.value
        return
    go_left = X[idx, node.feature_index] <= node.threshold
    _tree_values(node.left, X, idx[go_left], out)
    _tree_values(node.right, X, idx[~go_left], out)


def iter_splits(node: TreeNode):
    if isinstance(node, Split):
        yield node
        yield from iter_splits(node.left)
        yield from iter_splits(node.right)


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


@dataclass(frozen=True, eq=False)
class GbdtModel:
    base_prediction: float
    learning_rate: float
    trees: tuple
    feature_names: tuple
    training_meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "base_prediction": self.base_prediction,
            "learning_rate": self.learning_rate,
            "feature_names": list(self.feature_names),
            "trees": [_node_to_dict(t) for t in self.trees],
            "training_meta": self.training_meta,
        }

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        return cls(
            base_prediction=float(d["base_prediction"]),
            learning_rate=float(d["learning_rate"]),
            trees=tuple(_node_from_dict(t) for t in d["trees"]),
            feature_names=tuple(d["feature_names"]),
            training_meta=d.get("training_meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "GbdtModel":
        return cls.from_dict(json.loads(text))


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"value": node.value, "n_samples": node.n_samples}
    return {
        "feature_index": node.feature_index,
        "threshold": node.threshold,
        "gain": node.gain,
        "n_samples": node.n_samples,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "value" in d:
        return Leaf(float(d["value"]), int(d.get("n_samples", 0)))
    return Split(
        feature_index=int(d["feature_index"]),
        threshold=float(d["threshold"]),
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
        gain=float(d.get("gain", 0.0)),
        n_samples=int(d.get("n_samples", 0)),
    )


# -- split search ----------------------------------------------------------


def candidate_thresholds(sorted_values: np.ndarray, cap: int) -> np.ndarray:
    """Midpoints between consecutive distinct values, or between ``cap + 1`` quantile-spaced ones."""
    xs = sorted_values
    change = np.flatnonzero(xs[1:] != xs[:-1])
    if change.size == 0:
        return np.empty(0)
    if change.size <= cap:
        return (xs[change] + xs[change + 1]) / 2
    uniq = np.append(xs[change], xs[-1])
    picks = np.rint(np.arange(cap + 1) * ((uniq.size - 1) / cap)).astype(np.int64)
    return (uniq[picks[:-1]] + uniq[picks[1:]]) / 2


class _SplitFinder:
    """Exact greedy search over presorted columns.

    ``order`` holds, per feature, the training-row indices sorted by that
    feature. A node's sorted view is recovered by filtering ``order`` with a
    membership mask, so no per-node sorting is needed.
    """

    def __init__(self, X: np.ndarray, hp: Hyperparams):
        self.X = X
        self.hp = hp
        self.order_t = np.argsort(X, axis=0, kind="stable").T.copy()  # (p, n)
        self.sorted_t = np.take_along_axis(X, self.order_t.T, axis=0).T.copy()

    def best(self, idx: np.ndarray, r: np.ndarray):
        """Best (feature, threshold, score) for rows ``idx``; score = S_L^2/n_L + S_R^2/n_R."""
        n_all = self.X.shape[0]
        member = np.zeros(n_all, dtype=bool)
        member[idx] = True
        m_t = member[self.order_t]
        p = self.order_t.shape[0]
        n = idx.size
        rows_t = self.order_t[m_t].reshape(p, n)
        xs_t = self.sorted_t[m_t].reshape(p, n)
        csum_t = np.cumsum(r[rows_t], axis=1)
        min_leaf = self.hp.min_leaf
        cap = self.hp.max_thresholds_per_feature

        best = None
        best_score = -math.inf
        for j in range(p):
            xs = xs_t[j]
            thr = candidate_thresholds(xs, cap)
            if thr.size == 0:
                continue
            n_left = np.searchsorted(xs, thr, side="right")
            ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
            if not ok.any():
                continue
            thr, n_left = thr[ok], n_left[ok]
            s_left = csum_t[j, n_left - 1]
            s_right = csum_t[j, -1] - s_left
            score = s_left * s_left / n_left + s_right * s_right / (n - n_left)
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score = float(score[k])
                best = (j, float(thr[k]))
        return best


def _sse(v: np.ndarray) -> float:
    if v.size == 0:
        return 0.0
    d = v - v.mean()
    return float(d @ d)


def _grow(finder: _SplitFinder, r: np.ndarray, idx: np.ndarray, depth: int, leaf_out: np.ndarray) -> TreeNode:
    hp = finder.hp
    vals = r[idx]
    n = idx.size
    if depth < hp.max_depth and n >= 2 * hp.min_leaf:
        parent_sse = _sse(vals)
        found = finder.best(idx, r) if parent_sse > 0 else None
        if found is not None:
            f, thr = found
            go_left = finder.X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            gain = parent_sse - _sse(r[li]) - _sse(r[ri])
            if gain > _MIN_REL_GAIN * parent_sse:
                left = _grow(finder, r, li, depth + 1, leaf_out)
                right = _grow(finder, r, ri, depth + 1, leaf_out)
                return Split(f, thr, left, right, gain=gain, n_samples=int(n))
    value = float(np.mean(vals))
    leaf_out[idx] = value
    return Leaf(value, int(n))


def fit(rows, hp: Hyperparams = Hyperparams(), seed: int = 0) -> GbdtModel:
    """Boost ``hp.n_trees`` regression trees on feature rows with targets.

    ``training_meta['train_mse']`` records the training MSE before the first
    tree and after each tree.
    """
    table = as_table(rows)
    n = len(table)
    if n < 2 * hp.min_leaf:
        raise TrainingError(f"need at least {2 * hp.min_leaf} rows, got {n}")
    for r in table:
        if r.y is None or not math.isfinite(r.y):
            raise TrainingError(f"row {r.poi_id}@{format_hour(r.at)} has no finite target")
    X = table.matrix().astype(float)
    if not np.all(np.isfinite(X)):
        raise TrainingError("feature matrix contains non-finite values")
    y = table.targets()

    base = float(np.mean(y))
    lr = float(hp.learning_rate)
    rng = np.random.default_rng(seed)
    finder = _SplitFinder(X, hp)
    acc = np.zeros(n)
    all_rows = np.arange(n)
    trees = []
    pred = base + lr * acc
    mse = [float(np.mean((y - pred) ** 2))]
    for _ in range(hp.n_trees):
        resid = y - pred
        if hp.subsample < 1.0:
            k = max(2 * hp.min_leaf, int(round(hp.subsample * n)))
            grow_idx = np.sort(rng.choice(n, size=min(k, n), replace=False))
        else:
            grow_idx = all_rows
        leaf_vals = np.zeros(n)
        tree = _grow(finder, resid, grow_idx, 0, leaf_vals)
        if hp.subsample < 1.0:
            _tree_values(tree, X, all_rows, leaf_vals)
        trees.append(tree)
        acc += leaf_vals
        pred = base + lr * acc
        mse.append(float(np.mean((y - pred) ** 2)))

    meta = {
        "n_rows": n,
        "seed": int(seed),
        "hyperparameters": asdict(hp),
        "poi_ids": sorted({r.poi_id for r in table}),
        "first_row": format_hour(table[0].at),
        "last_row": format_hour(table[-1].at),
        "train_mse": mse,
    }
    return GbdtModel(base, lr, tuple(trees), tuple(table.feature_names), meta)


# -- prediction and evaluation ----------------------------------------------


def predict_raw(model: GbdtModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ShapeError(f"expected {model.n_features} features, got shape {x.shape}")
    acc = 0.0
    for t in model.trees:
        acc += tree_value(t, x)
    return model.base_prediction + model.learning_rate * acc


def predict(model: GbdtModel, x) -> float:
    """Prediction for one feature vector, clipped at zero (counts cannot be negative)."""
    return max(predict_raw(model, x), 0.0)


def predict_batch(model: GbdtModel, X, clip: bool = False) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"expected (n, {model.n_features}) matrix, got shape {X.shape}")
    n = X.shape[0]
    acc = np.zeros(n)
    vals = np.empty(n)
    idx = np.arange(n)
    for t in model.trees:
        _tree_values(t, X, idx, vals)
        acc += vals
    out = model.base_prediction + model.learning_rate * acc
    return np.maximum(out, 0.0) if clip else out


def _table_for(model: GbdtModel, rows) -> FeatureTable:
    table = as_table(rows)
    if tuple(table.feature_names) != tuple(model.feature_names):
        from .features import select_features

        table = select_features(table, model.feature_names)
    return table


def evaluate_mae(model: GbdtModel, rows) -> float:
    """Mean absolute error of the unclipped predictions."""
    table = _table_for(model, rows)
    if len(table) == 0:
        raise TrainingError("cannot evaluate MAE on zero rows")
    y = table.targets()
    if np.isnan(y).any():
        raise TrainingError("every evaluation row needs a target")
    return float(np.mean(np.abs(y - predict_batch(model, table.matrix()))))


@dataclass(frozen=True)
class ImportanceReport:
    scores: tuple  # (feature_name, score) sorted by score descending, then feature order

    def top(self, k: int) -> list[str]:
        return [name for name, _ in self.scores[:k]]

    def as_dict(self) -> dict[str, float]:
        return dict(self.scores)


def feature_importance(model: GbdtModel) -> ImportanceReport:
    """Split-gain importance: per-feature sum of SSE reductions, normalized to sum to 1."""
    totals = np.zeros(model.n_features)
    for t in model.trees:
        for s in iter_splits(t):
            totals[s.feature_index] += s.gain
    grand = totals.sum()
    if grand > 0:
        totals = totals / grand
    order = sorted(range(model.n_features), key=lambda i: (-totals[i], i))
    return ImportanceReport(tuple((model.feature_names[i], float(totals[i])) for i in order))
