"""Weighted gain-ratio decision trees and a boosted voting ensemble.

The weak learner is a greedy top-down tree over continuous attributes:
candidate thresholds are midpoints between consecutive distinct sorted
values, splits maximize weighted gain ratio, and ties are fully specified
(lowest feature index, then lowest threshold) so training is deterministic.
The meta-learner reweights instances multiplicatively and combines stages
by a weighted +1/-1 vote.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MODEL_FORMAT_VERSION = 1
ZERO_ERROR_STAGE_WEIGHT = math.log(1e9)
_MIN_SPLIT_INFO = 1e-12


@dataclass
class BoostParams:
    """Hyperparameters shared by every ensemble training in a run."""

    rounds: int = 50
    max_depth: int = 3


@dataclass
class DecisionTree:
    """Flat-array binary tree; ``feature[i] == -1`` marks a leaf.

    Internal nodes route ``value <= threshold`` to ``left``. Leaves carry a
    0/1 label and the weighted fraction of the leaf's training mass that
    agrees with it.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_label: np.ndarray
    leaf_confidence: np.ndarray
    n_features: int

    @property
    def node_count(self) -> int:
        return self.feature.size


@dataclass
class BoostedEnsemble:
    """Sequence of trees with positive stage weights, combined by vote."""

    trees: list[DecisionTree]
    stage_weights: np.ndarray
    stage_errors: np.ndarray
    rounds_run: int
    n_features: int
    # training-distribution weights after the last completed round; useful
    # for inspecting the reweighting dynamics, never persisted
    final_instance_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def stages(self) -> list[tuple[DecisionTree, float]]:
        return list(zip(self.trees, (float(w) for w in self.stage_weights)))


def _validate_dataset(X, y, weights):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array of feature values")
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    if np.isnan(X).any():
        raise ValueError("NaN feature value in dataset")
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise ValueError("labels must align with rows")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    if weights is None:
        w = np.full(X.shape[0], 1.0 / X.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (X.shape[0],):
            raise ValueError("weights must align with rows")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and strictly positive")
        w = w / w.sum()
    return X, y, w


def _xlog2x(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    mask = v > 0
    out[mask] = v[mask] * np.log2(v[mask])
    return out


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    return -_xlog2x(p) - _xlog2x(1.0 - p)


def _best_split(X, y, w, idx):
    """Best (feature, threshold) by weighted gain ratio, or None.

    Scanning features in index order and thresholds in ascending order with
    strict improvement only realizes the documented tie-breaks.
    """
    total_w = w[idx].sum()
    total_pos = w[idx][y[idx] == 1].sum()
    parent_entropy = float(_binary_entropy(np.array([total_pos / total_w]))[0])

    best = None  # (ratio, feature, threshold)
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sw = w[idx][order]
        spos = sw * (y[idx][order] == 1)
        cum_w = np.cumsum(sw)
        cum_pos = np.cumsum(spos)

        cut = np.flatnonzero(sv[:-1] < sv[1:])
        if cut.size == 0:
            continue
        thr = 0.5 * (sv[cut] + sv[cut + 1])
        # keep thresholds strictly between the two observed values
        strict = (thr > sv[cut]) & (thr < sv[cut + 1])
        if not strict.any():
            continue
        cut, thr = cut[strict], thr[strict]

        wl = cum_w[cut]
        wr = total_w - wl
        frac_l = wl / total_w
        frac_r = wr / total_w
        with np.errstate(divide="ignore", invalid="ignore"):
            h_left = _binary_entropy(cum_pos[cut] / wl)
            h_right = _binary_entropy((total_pos - cum_pos[cut]) / wr)
            gain = parent_entropy - frac_l * h_left - frac_r * h_right
            split_info = -_xlog2x(frac_l) - _xlog2x(frac_r)
            ratio = gain / split_info
        ratio = np.where(
            (split_info >= _MIN_SPLIT_INFO) & np.isfinite(ratio), ratio, -np.inf
        )
        k = int(np.argmax(ratio))  # first max: lowest threshold wins in-feature ties
        if ratio[k] > 0 and (best is None or ratio[k] > best[0]):
            best = (float(ratio[k]), f, float(thr[k]))
    if best is None:
        return None
    return best[1], best[2]


def train_tree(X, y, weights=None, max_depth: int = 3) -> DecisionTree:
    """Greedy top-down induction on weighted instances.

    Recursion stops at max_depth, node purity, or when no split has
    positive gain ratio. Leaf labels are the weighted majority, ties going
    to label 0.
    """
    X, y, w = _validate_dataset(X, y, weights)
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_label: list[int] = []
    leaf_confidence: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_label.append(-1)
        leaf_confidence.append(np.nan)
        return len(feature) - 1

    def build(idx: np.ndarray, depth: int) -> int:
        nid = new_node()
        w_pos = w[idx][y[idx] == 1].sum()
        w_neg = w[idx].sum() - w_pos
        label = 1 if w_pos > w_neg else 0
        majority = w_pos if label == 1 else w_neg

        split = None
        pure = not ((y[idx] == 1).any() and (y[idx] == 0).any())
        if not pure and depth < max_depth:
            split = _best_split(X, y, w, idx)
        if split is None:
            leaf_label[nid] = label
            leaf_confidence[nid] = float(majority / (w_pos + w_neg))
            return nid

        f, t = split
        feature[nid] = f
        threshold[nid] = t
        goes_left = X[idx, f] <= t
        left[nid] = build(idx[goes_left], depth + 1)
        right[nid] = build(idx[~goes_left], depth + 1)
        return nid

    build(np.arange(X.shape[0], dtype=np.int64), 0)
    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        leaf_label=np.array(leaf_label, dtype=np.int64),
        leaf_confidence=np.array(leaf_confidence, dtype=np.float64),
        n_features=X.shape[1],
    )


def predict_tree(tree: DecisionTree, x):
    """Root-to-leaf descent; ``value <= threshold`` goes left.

    Accepts a single feature vector or a 2-D batch; returns an int label or
    an int array accordingly.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr[None, :] if single else arr
    if pts.ndim != 2 or pts.shape[1] != tree.n_features:
        raise ValueError(
            f"feature arity mismatch: tree expects {tree.n_features}, "
            f"got shape {arr.shape}"
        )
    node = np.zeros(pts.shape[0], dtype=np.int64)
    active = tree.feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        goes_left = pts[rows, tree.feature[cur]] <= tree.threshold[cur]
        node[rows] = np.where(goes_left, tree.left[cur], tree.right[cur])
        active = tree.feature[node] >= 0
    labels = tree.leaf_label[node]
    return int(labels[0]) if single else labels


def train_boosted(X, y, rounds: int = 50, max_depth: int = 3) -> BoostedEnsemble:
    """Discrete two-class boosting over the weighted tree learner.

    Per round: train a tree on the current weights, measure its weighted
    error e; a perfect tree is kept with a large capped weight and training
    stops; e >= 0.5 discards the stage and stops; otherwise the stage gets
    weight ln((1-e)/e), misclassified instances are upweighted by (1-e)/e,
    and weights are renormalized.
    """
    X, y, w = _validate_dataset(X, y, None)
    if rounds < 1:
        raise ValueError("rounds must be >= 1")

    trees: list[DecisionTree] = []
    stage_weights: list[float] = []
    stage_errors: list[float] = []
    rounds_run = 0
    for _ in range(rounds):
        rounds_run += 1
        tree = train_tree(X, y, w, max_depth)
        miss = predict_tree(tree, X) != y
        if not miss.any():
            trees.append(tree)
            stage_weights.append(ZERO_ERROR_STAGE_WEIGHT)
            stage_errors.append(0.0)
            break
        error = float(w[miss].sum())
        if error >= 0.5:
            if not trees:
                raise ValueError("weak learner no better than chance")
            break
        trees.append(tree)
        stage_weights.append(math.log((1.0 - error) / error))
        stage_errors.append(error)
        w = w.copy()
        w[miss] *= (1.0 - error) / error
        w /= w.sum()

    return BoostedEnsemble(
        trees=trees,
        stage_weights=np.array(stage_weights, dtype=np.float64),
        stage_errors=np.array(stage_errors, dtype=np.float64),
        rounds_run=rounds_run,
        n_features=X.shape[1],
        final_instance_weights=w,
    )


def predict_score(ensemble: BoostedEnsemble, x):
    """Normalized weighted vote in [-1, 1]; stages vote +1 for label 1."""
    if not ensemble.trees:
        raise ValueError("ensemble has no stages")
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr[None, :] if single else arr
    votes = np.zeros(pts.shape[0], dtype=np.float64)
    for tree, weight in zip(ensemble.trees, ensemble.stage_weights):
        signs = np.where(predict_tree(tree, pts) == 1, 1.0, -1.0)
        votes += weight * signs
    score = votes / ensemble.stage_weights.sum()
    return float(score[0]) if single else score


def predict_label(ensemble: BoostedEnsemble, x):
    """1 iff the vote score is strictly positive (a tied vote yields 0)."""
    score = predict_score(ensemble, x)
    if np.isscalar(score):
        return int(score > 0)
    return (score > 0).astype(np.int64)


def training_error(ensemble: BoostedEnsemble, X, y) -> float:
    """Fraction of rows the full ensemble misclassifies."""
    y = np.asarray(y, dtype=np.int64)
    return float(np.mean(predict_label(ensemble, np.asarray(X, dtype=np.float64)) != y))


def training_error_bound(ensemble: BoostedEnsemble) -> float:
    """Classic multiplicative boosting bound, prod_t 2*sqrt(e_t*(1-e_t))."""
    e = ensemble.stage_errors
    return float(np.prod(2.0 * np.sqrt(e * (1.0 - e))))


# ---------------------------------------------------------------------------
# persistence


def tree_to_dict(tree: DecisionTree) -> dict:
    nodes = []
    for i in range(tree.node_count):
        if tree.feature[i] < 0:
            nodes.append(
                {
                    "label": int(tree.leaf_label[i]),
                    "confidence": float(tree.leaf_confidence[i]),
                }
            )
        else:
            nodes.append(
                {
                    "feature": int(tree.feature[i]),
                    "threshold": float(tree.threshold[i]),
                    "left": int(tree.left[i]),
                    "right": int(tree.right[i]),
                }
            )
    return {"n_features": tree.n_features, "nodes": nodes}


def tree_from_dict(payload: dict) -> DecisionTree:
    nodes = payload["nodes"]
    count = len(nodes)
    feature = np.full(count, -1, dtype=np.int64)
    threshold = np.full(count, np.nan, dtype=np.float64)
    left = np.full(count, -1, dtype=np.int64)
    right = np.full(count, -1, dtype=np.int64)
    leaf_label = np.full(count, -1, dtype=np.int64)
    leaf_confidence = np.full(count, np.nan, dtype=np.float64)
    for i, node in enumerate(nodes):
        if "feature" in node:
            feature[i] = node["feature"]
            threshold[i] = node["threshold"]
            left[i] = node["left"]
            right[i] = node["right"]
        else:
            leaf_label[i] = node["label"]
            leaf_confidence[i] = node["confidence"]
    return DecisionTree(
        feature, threshold, left, right, leaf_label, leaf_confidence,
        n_features=int(payload["n_features"]),
    )


def ensemble_to_dict(ensemble: BoostedEnsemble) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "boosted_ensemble",
        "n_features": ensemble.n_features,
        "rounds_run": ensemble.rounds_run,
        "stages": [
            {
                "weight": float(w),
                "error": float(e),
                "tree": tree_to_dict(tree),
            }
            for tree, w, e in zip(
                ensemble.trees, ensemble.stage_weights, ensemble.stage_errors
            )
        ],
    }


def ensemble_from_dict(payload: dict) -> BoostedEnsemble:
    if payload.get("kind") != "boosted_ensemble":
        raise ValueError("not a boosted-ensemble payload")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {payload.get('format_version')}")
    stages = payload["stages"]
    return BoostedEnsemble(
        trees=[tree_from_dict(s["tree"]) for s in stages],
        stage_weights=np.array([s["weight"] for s in stages], dtype=np.float64),
        stage_errors=np.array([s["error"] for s in stages], dtype=np.float64),
        rounds_run=int(payload["rounds_run"]),
        n_features=int(payload["n_features"]),
    )


def save_ensemble(ensemble: BoostedEnsemble, path) -> None:
    Path(path).write_text(
        json.dumps(ensemble_to_dict(ensemble), sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_ensemble(path) -> BoostedEnsemble:
    return ensemble_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
