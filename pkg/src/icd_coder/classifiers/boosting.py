"""One-vs-rest gradient-boosted trees on logistic loss with second-order
leaf weights.

Per label and boosting round, a regression tree is grown on the gradient
g = p - y and hessian h = p(1 - p) of the current sigmoid scores (raw scores
start at 0, so p = 0.5 in round one). Leaf weights are
-soft_threshold(G, reg_alpha) / (H + reg_lambda); a split is kept only when
its gain exceeds gamma and both children satisfy sum(h) >= min_child_weight.
Row and feature subsampling are drawn per tree from a seeded stream. Final
scores are sigmoids of the learning-rate-scaled leaf sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .common import (
    ColumnAccess,
    check_feature_dim,
    load_model_artifact,
    midpoint_thresholds,
    save_model_artifact,
)


@dataclass(frozen=True)
class BoostParams:
    n_estimators: int = 100
    learning_rate: float = 0.3
    max_depth: int = 6
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.subsample <= 1.0 or not 0.0 < self.colsample_bytree <= 1.0:
            raise ValueError("subsample and colsample_bytree must be in (0, 1]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.gamma < 0 or self.reg_alpha < 0 or self.reg_lambda < 0:
            raise ValueError("gamma, reg_alpha, reg_lambda must be >= 0")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _soft_threshold(g: np.ndarray, alpha: float) -> np.ndarray:
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


@dataclass
class _BoostTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf weight (raw score contribution)

    def predict(self, columns: ColumnAccess) -> np.ndarray:
        n = columns.n_rows
        out = np.zeros(n)
        frontier = [(0, np.arange(n, dtype=np.int64))]
        while frontier:
            node, rows = frontier.pop()
            if self.feature[node] < 0:
                out[rows] = self.value[node]
                continue
            x = columns.column(int(self.feature[node]))[rows]
            go_left = x <= self.threshold[node]
            if go_left.any():
                frontier.append((int(self.left[node]), rows[go_left]))
            if not go_left.all():
                frontier.append((int(self.right[node]), rows[~go_left]))
        return out


class _BoostTreeBuilder:
    def __init__(self, columns: ColumnAccess, g: np.ndarray, h: np.ndarray,
                 features: np.ndarray, params: BoostParams):
        self.columns = columns
        self.g = g
        self.h = h
        self.features = features
        self.p = params
        self.nodes: list[list] = []

    def _leaf_weight(self, G: float, H: float) -> float:
        return float(-_soft_threshold(np.array(G), self.p.reg_alpha) / (H + self.p.reg_lambda))

    def _score(self, G, H):
        return _soft_threshold(G, self.p.reg_alpha) ** 2 / (H + self.p.reg_lambda)

    def build(self, rows: np.ndarray) -> _BoostTree:
        self._grow(rows, 0)
        return _BoostTree(
            feature=np.array([n[0] for n in self.nodes], dtype=np.int64),
            threshold=np.array([n[1] for n in self.nodes]),
            left=np.array([n[2] for n in self.nodes], dtype=np.int64),
            right=np.array([n[3] for n in self.nodes], dtype=np.int64),
            value=np.array([n[4] for n in self.nodes]),
        )

    def _grow(self, rows: np.ndarray, depth: int) -> int:
        node_id = len(self.nodes)
        G = float(self.g[rows].sum())
        H = float(self.h[rows].sum())
        self.nodes.append([-1, 0.0, -1, -1, self._leaf_weight(G, H)])
        if depth >= self.p.max_depth or rows.size < 2:
            return node_id
        best = self._best_split(rows, G, H)
        if best is None:
            return node_id
        feature, thr, go_left = best
        left_id = self._grow(rows[go_left], depth + 1)
        right_id = self._grow(rows[~go_left], depth + 1)
        node = self.nodes[node_id]
        node[0], node[1], node[2], node[3] = feature, thr, left_id, right_id
        return node_id

    def _best_split(self, rows: np.ndarray, G: float, H: float):
        p = self.p
        parent_score = float(self._score(np.array(G), H))
        best_gain = p.gamma
        best = None
        g_rows = self.g[rows]
        h_rows = self.h[rows]
        for feature in self.features:
            x = self.columns.column(int(feature))[rows]
            if x.min() == x.max():
                continue
            order = np.argsort(x, kind="stable")
            xs = x[order]
            Gl = np.cumsum(g_rows[order])
            Hl = np.cumsum(h_rows[order])
            boundary = np.flatnonzero(xs[:-1] < xs[1:])
            if boundary.size == 0:
                continue
            GL, HL = Gl[boundary], Hl[boundary]
            GR, HR = G - GL, H - HL
            valid = (HL >= p.min_child_weight) & (HR >= p.min_child_weight)
            if not valid.any():
                continue
            gain = 0.5 * (self._score(GL, HL) + self._score(GR, HR) - parent_score)
            gain[~valid] = -np.inf
            k = int(np.argmax(gain))
            if gain[k] > best_gain:
                thr = float(midpoint_thresholds(xs, boundary[k : k + 1])[0])
                best_gain = float(gain[k])
                best = (int(feature), thr, x <= thr)
        return best


class BoostingModel:
    family = "xgboost"

    def __init__(self, trees_per_label: list[list[_BoostTree]], params: BoostParams,
                 n_features_in: int, flagged_labels: list[int]):
        self.trees_per_label = trees_per_label
        self.params = params
        self.n_features_in = n_features_in
        self.flagged_labels = flagged_labels

    @property
    def n_labels(self) -> int:
        return len(self.trees_per_label)

    def raw_scores(self, X) -> np.ndarray:
        check_feature_dim(X, self.n_features_in)
        columns = ColumnAccess(X)
        out = np.zeros((X.shape[0], self.n_labels))
        for l, trees in enumerate(self.trees_per_label):
            for tree in trees:
                out[:, l] += self.params.learning_rate * tree.predict(columns)
        return out

    def predict_scores(self, X) -> np.ndarray:
        scores = _sigmoid(self.raw_scores(X))
        for l in self.flagged_labels:
            scores[:, l] = 0.0
        return scores

    def save(self, path: str | Path) -> None:
        blobs = []
        counts = []
        for l, trees in enumerate(self.trees_per_label):
            counts.append(len(trees))
            for t, tree in enumerate(trees):
                blobs += [
                    (f"l{l}_t{t}_feature", tree.feature),
                    (f"l{l}_t{t}_threshold", tree.threshold),
                    (f"l{l}_t{t}_left", tree.left),
                    (f"l{l}_t{t}_right", tree.right),
                    (f"l{l}_t{t}_value", tree.value),
                ]
        save_model_artifact(
            path, self.family, params=self.params.__dict__,
            meta={"n_features_in": self.n_features_in, "n_labels": self.n_labels,
                  "trees_per_label": counts, "flagged_labels": self.flagged_labels},
            blobs=blobs,
        )

    @classmethod
    def load(cls, path: str | Path) -> "BoostingModel":
        header, arrays = load_model_artifact(path)
        if header["family"] != cls.family:
            raise ValueError(f"artifact family {header['family']!r}")
        trees_per_label = [
            [
                _BoostTree(
                    feature=arrays[f"l{l}_t{t}_feature"],
                    threshold=arrays[f"l{l}_t{t}_threshold"],
                    left=arrays[f"l{l}_t{t}_left"],
                    right=arrays[f"l{l}_t{t}_right"],
                    value=arrays[f"l{l}_t{t}_value"],
                )
                for t in range(count)
            ]
            for l, count in enumerate(header["meta"]["trees_per_label"])
        ]
        return cls(trees_per_label, BoostParams(**header["params"]),
                   header["meta"]["n_features_in"], header["meta"]["flagged_labels"])


def fit_gradient_boosting(X, Y, params: BoostParams) -> BoostingModel:
    params.validate()
    Y = np.asarray(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    data = X.data if sp.issparse(X) else np.asarray(X)
    if not np.isfinite(data).all():
        raise ValueError("feature values must be finite")
    n, n_labels = Y.shape
    Y = (Y != 0).astype(np.float64)

    columns = ColumnAccess(X)
    n_sub = max(1, int(round(params.subsample * n)))
    n_cols = max(1, int(round(params.colsample_bytree * X.shape[1])))

    trees_per_label: list[list[_BoostTree]] = []
    flagged: list[int] = []
    for l in range(n_labels):
        y = Y[:, l]
        if y.sum() == 0:
            trees_per_label.append([])
            flagged.append(l)
            continue
        raw = np.zeros(n)
        trees: list[_BoostTree] = []
        for t in range(params.n_estimators):
            rng = np.random.default_rng([params.seed, l, t])
            p = _sigmoid(raw)
            g = p - y
            h = p * (1.0 - p)
            rows = (np.sort(rng.choice(n, size=n_sub, replace=False))
                    if n_sub < n else np.arange(n))
            feats = (np.sort(rng.choice(X.shape[1], size=n_cols, replace=False))
                     if n_cols < X.shape[1] else np.arange(X.shape[1]))
            builder = _BoostTreeBuilder(columns, g, h, feats, params)
            tree = builder.build(rows)
            trees.append(tree)
            raw += params.learning_rate * tree.predict(columns)
        trees_per_label.append(trees)
    return BoostingModel(trees_per_label, params, X.shape[1], flagged)
