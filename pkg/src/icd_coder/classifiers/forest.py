"""Random forest of multi-output decision trees for multi-label targets.

Each tree predicts all labels at once: splits maximize the mean per-label
Gini impurity decrease and every leaf stores the per-label positive fraction
of its training rows. Forest scores are the average of leaf fractions across
trees. With ``class_weight="balanced"`` each label's positives weigh
n/(2*n_pos) and negatives n/(2*n_neg) inside the impurity sums (fractions at
the leaves stay raw).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .common import (
    ColumnAccess,
    check_feature_dim,
    load_model_artifact,
    midpoint_thresholds,
    save_model_artifact,
)

MAX_FEATURES_MODES = ("sqrt", "log2", "all")
CLASS_WEIGHTS = ("none", "balanced")
_EPS = 1e-12


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 25
    max_depth: int | None = 15
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features_mode: str = "sqrt"
    bootstrap: bool = True
    class_weight: str = "none"
    seed: int = 0

    def validate(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 1 or self.min_samples_leaf < 1:
            raise ValueError("min_samples_* are absolute counts >= 1")
        if self.max_features_mode not in MAX_FEATURES_MODES:
            raise ValueError(f"max_features_mode must be one of {MAX_FEATURES_MODES}")
        if self.class_weight not in CLASS_WEIGHTS:
            raise ValueError(f"class_weight must be one of {CLASS_WEIGHTS}")


@dataclass
class _Tree:
    feature: np.ndarray      # -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_values: np.ndarray  # (n_nodes, n_labels); rows meaningful at leaves

    def predict(self, columns: ColumnAccess) -> np.ndarray:
        n = columns.n_rows
        out = np.zeros((n, self.leaf_values.shape[1]))
        frontier = [(0, np.arange(n, dtype=np.int64))]
        while frontier:
            node, rows = frontier.pop()
            if self.feature[node] < 0:
                out[rows] = self.leaf_values[node]
                continue
            x = columns.column(int(self.feature[node]))[rows]
            go_left = x <= self.threshold[node]
            if go_left.any():
                frontier.append((int(self.left[node]), rows[go_left]))
            if not go_left.all():
                frontier.append((int(self.right[node]), rows[~go_left]))
        return out


class _TreeBuilder:
    def __init__(self, columns: ColumnAccess, Y: np.ndarray, params: ForestParams,
                 w_pos: np.ndarray, w_neg: np.ndarray, rng: np.random.Generator):
        self.columns = columns
        self.Y = Y
        self.params = params
        self.w_pos = w_pos
        self.w_neg = w_neg
        self.rng = rng
        self.n_features = columns.n_cols
        self.nodes: list[list] = []  # [feature, threshold, left, right, leaf_row]

    def build(self, rows: np.ndarray) -> _Tree:
        self._grow(rows, depth=0)
        n_nodes = len(self.nodes)
        feature = np.array([n[0] for n in self.nodes], dtype=np.int64)
        threshold = np.array([n[1] for n in self.nodes])
        left = np.array([n[2] for n in self.nodes], dtype=np.int64)
        right = np.array([n[3] for n in self.nodes], dtype=np.int64)
        leaf_values = np.vstack([n[4] for n in self.nodes])
        return _Tree(feature, threshold, left, right, leaf_values)

    def _candidate_features(self) -> np.ndarray:
        mode = self.params.max_features_mode
        if mode == "all":
            return np.arange(self.n_features)
        m = max(1, int(np.sqrt(self.n_features)) if mode == "sqrt"
                else int(np.log2(self.n_features)))
        return self.rng.choice(self.n_features, size=min(m, self.n_features), replace=False)

    def _grow(self, rows: np.ndarray, depth: int) -> int:
        node_id = len(self.nodes)
        fractions = self.Y[rows].mean(axis=0)
        self.nodes.append([-1, 0.0, -1, -1, fractions])

        p = self.params
        if (p.max_depth is not None and depth >= p.max_depth) or rows.size < p.min_samples_split:
            return node_id
        pos = self.Y[rows].sum(axis=0).astype(np.float64)
        parent_impurity = self._impurity_mass(pos, rows.size - pos)
        if parent_impurity <= _EPS:
            return node_id

        best = self._best_split(rows, pos, parent_impurity)
        if best is None:
            return node_id
        feature, thr, go_left = best
        left_id = self._grow(rows[go_left], depth + 1)
        right_id = self._grow(rows[~go_left], depth + 1)
        self.nodes[node_id][0] = feature
        self.nodes[node_id][1] = thr
        self.nodes[node_id][2] = left_id
        self.nodes[node_id][3] = right_id
        return node_id

    def _impurity_mass(self, pos: np.ndarray, neg: np.ndarray) -> float:
        """Sum over labels of 2*wp*wn/(wp+wn), the weighted-mass Gini."""
        wp = self.w_pos * pos
        wn = self.w_neg * neg
        tot = wp + wn
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(tot > 0, 2.0 * wp * wn / tot, 0.0)
        return float(g.sum())

    def _best_split(self, rows: np.ndarray, pos_total: np.ndarray, parent: float):
        p = self.params
        n = rows.size
        best_gain = _EPS
        best = None
        for feature in self._candidate_features():
            x = self.columns.column(int(feature))[rows]
            if x.min() == x.max():
                continue
            order = np.argsort(x, kind="stable")
            xs = x[order]
            cum_pos = np.cumsum(self.Y[rows[order]], axis=0, dtype=np.float64)

            boundary = np.flatnonzero(xs[:-1] < xs[1:])
            if boundary.size == 0:
                continue
            sizes_left = boundary + 1
            valid = (sizes_left >= p.min_samples_leaf) & (n - sizes_left >= p.min_samples_leaf)
            boundary = boundary[valid]
            if boundary.size == 0:
                continue

            pos_left = cum_pos[boundary]                       # (cands, L)
            neg_left = (boundary + 1)[:, None] - pos_left
            pos_right = pos_total[None, :] - pos_left
            neg_right = (n - boundary - 1)[:, None] - pos_right

            gain = parent - self._impurity_rows(pos_left, neg_left) \
                          - self._impurity_rows(pos_right, neg_right)
            k = int(np.argmax(gain))
            if gain[k] > best_gain:
                thr = float(midpoint_thresholds(xs, boundary[k : k + 1])[0])
                best_gain = float(gain[k])
                best = (int(feature), thr, x <= thr)
        return best

    def _impurity_rows(self, pos: np.ndarray, neg: np.ndarray) -> np.ndarray:
        wp = self.w_pos[None, :] * pos
        wn = self.w_neg[None, :] * neg
        tot = wp + wn
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(tot > 0, 2.0 * wp * wn / tot, 0.0)
        return g.sum(axis=1)


class ForestModel:
    family = "random_forest"

    def __init__(self, trees: list[_Tree], params: ForestParams, n_features_in: int,
                 n_labels: int):
        self.trees = trees
        self.params = params
        self.n_features_in = n_features_in
        self.n_labels = n_labels

    def predict_scores(self, X) -> np.ndarray:
        check_feature_dim(X, self.n_features_in)
        columns = ColumnAccess(X)
        out = np.zeros((X.shape[0], self.n_labels))
        for tree in self.trees:
            out += tree.predict(columns)
        return out / len(self.trees)

    def save(self, path: str | Path) -> None:
        blobs = []
        for t, tree in enumerate(self.trees):
            blobs += [
                (f"tree{t}_feature", tree.feature),
                (f"tree{t}_threshold", tree.threshold),
                (f"tree{t}_left", tree.left),
                (f"tree{t}_right", tree.right),
                (f"tree{t}_leaf_values", tree.leaf_values),
            ]
        save_model_artifact(
            path, self.family, params=self.params.__dict__,
            meta={"n_features_in": self.n_features_in, "n_labels": self.n_labels,
                  "n_trees": len(self.trees)},
            blobs=blobs,
        )

    @classmethod
    def load(cls, path: str | Path) -> "ForestModel":
        header, arrays = load_model_artifact(path)
        if header["family"] != cls.family:
            raise ValueError(f"artifact family {header['family']!r}")
        params = ForestParams(**header["params"])
        trees = [
            _Tree(
                feature=arrays[f"tree{t}_feature"],
                threshold=arrays[f"tree{t}_threshold"],
                left=arrays[f"tree{t}_left"],
                right=arrays[f"tree{t}_right"],
                leaf_values=arrays[f"tree{t}_leaf_values"],
            )
            for t in range(header["meta"]["n_trees"])
        ]
        return cls(trees, params, header["meta"]["n_features_in"], header["meta"]["n_labels"])


def fit_random_forest(X, Y, params: ForestParams) -> ForestModel:
    params.validate()
    Y = np.asarray(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    n, n_labels = Y.shape
    Y = (Y != 0).astype(np.int8)

    pos = Y.sum(axis=0).astype(np.float64)
    neg = n - pos
    if params.class_weight == "balanced":
        w_pos = np.where(pos > 0, n / (2.0 * np.maximum(pos, 1.0)), 1.0)
        w_neg = np.where(neg > 0, n / (2.0 * np.maximum(neg, 1.0)), 1.0)
    else:
        w_pos = np.ones(n_labels)
        w_neg = np.ones(n_labels)

    columns = ColumnAccess(X)
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_estimators)
    trees = []
    for t in range(params.n_estimators):
        rng = np.random.default_rng(seeds[t])
        rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        builder = _TreeBuilder(columns, Y, params, w_pos, w_neg, rng)
        trees.append(builder.build(np.sort(rows)))
    return ForestModel(trees, params, n_features_in=X.shape[1], n_labels=n_labels)
