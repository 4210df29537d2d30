"""Fully connected multi-label network trained with mini-batch binary
cross-entropy.

Hidden layers use ReLU with inverted dropout; the output layer is one sigmoid
unit per label. Zero hidden layers degenerate to multi-label logistic
regression. Optimizers are pinned: AdamW (beta1=0.9, beta2=0.999, eps=1e-8,
decoupled weight decay 0.01 on weights only), RMSprop (rho=0.99, eps=1e-8)
and plain SGD. Sparse design matrices are consumed natively through
sparse-dense products. Training is bit-deterministic per seed: fixed
initialization, shuffling and dropout streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .common import check_feature_dim, load_model_artifact, save_model_artifact

OPTIMIZERS = ("adamw", "rmsprop", "sgd")

ADAMW_BETA1 = 0.9
ADAMW_BETA2 = 0.999
ADAMW_EPS = 1e-8
ADAMW_WEIGHT_DECAY = 0.01
RMSPROP_RHO = 0.99
RMSPROP_EPS = 1e-8


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class MlpParams:
    hidden_layers: tuple[int, ...] = ()
    dropout: float = 0.0
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    optimizer: str = "adamw"
    seed: int = 0

    def validate(self) -> None:
        if len(self.hidden_layers) > 3:
            raise ValueError("at most 3 hidden layers")
        if any(w < 1 for w in self.hidden_layers):
            raise ValueError("hidden widths must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _matmul(X, W: np.ndarray) -> np.ndarray:
    return np.asarray(X @ W)


class MlpModel:
    family = "mlp"

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray],
                 params: MlpParams, n_features_in: int):
        self.weights = weights
        self.biases = biases
        self.params = params
        self.n_features_in = n_features_in

    @property
    def n_labels(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, X, dropout_rng: np.random.Generator | None = None) -> tuple[np.ndarray, list]:
        """Returns (sigmoid outputs, cache for backprop). Dropout is applied
        only when a dropout rng is supplied (training mode)."""
        p_drop = self.params.dropout
        cache = []
        a = X
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = _matmul(a, W) + b
            last = i == len(self.weights) - 1
            if last:
                out = _sigmoid(z)
                cache.append((a, z, None))
                return out, cache
            h = np.maximum(z, 0.0)
            mask = None
            if dropout_rng is not None and p_drop > 0.0:
                mask = (dropout_rng.random(h.shape) >= p_drop) / (1.0 - p_drop)
                h = h * mask
            cache.append((a, z, mask))
            a = h
        raise AssertionError("unreachable")

    def predict_scores(self, X) -> np.ndarray:
        check_feature_dim(X, self.n_features_in)
        out, _ = self.forward(X)
        return out

    def loss_and_gradients(
        self, X, Y: np.ndarray, dropout_rng: np.random.Generator | None = None
    ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Mean element-wise binary cross-entropy and its weight/bias gradients."""
        Y = np.asarray(Y, dtype=np.float64)
        out, cache = self.forward(X, dropout_rng)
        eps = 1e-12
        loss = float(-np.mean(Y * np.log(out + eps) + (1.0 - Y) * np.log(1.0 - out + eps)))

        scale = 1.0 / (out.shape[0] * out.shape[1])
        delta = (out - Y) * scale  # d loss / d z_out for sigmoid + BCE
        grads_w: list[np.ndarray] = [None] * len(self.weights)  # type: ignore[list-item]
        grads_b: list[np.ndarray] = [None] * len(self.biases)  # type: ignore[list-item]
        for i in range(len(self.weights) - 1, -1, -1):
            a_in, z, mask = cache[i]
            grads_w[i] = _matmul(a_in.T, delta)
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.weights[i].T
                if cache[i - 1][2] is not None:
                    delta = delta * cache[i - 1][2]
                delta = delta * (cache[i - 1][1] > 0.0)
        return loss, grads_w, grads_b

    def save(self, path: str | Path) -> None:
        blobs = []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            blobs += [(f"w{i}", W), (f"b{i}", b)]
        params = dict(self.params.__dict__)
        params["hidden_layers"] = list(self.params.hidden_layers)
        save_model_artifact(
            path, self.family, params=params,
            meta={"n_features_in": self.n_features_in, "n_layers": len(self.weights)},
            blobs=blobs,
        )

    @classmethod
    def load(cls, path: str | Path) -> "MlpModel":
        header, arrays = load_model_artifact(path)
        if header["family"] != cls.family:
            raise ValueError(f"artifact family {header['family']!r}")
        params = dict(header["params"])
        params["hidden_layers"] = tuple(params["hidden_layers"])
        n_layers = header["meta"]["n_layers"]
        weights = [arrays[f"w{i}"] for i in range(n_layers)]
        biases = [arrays[f"b{i}"] for i in range(n_layers)]
        return cls(weights, biases, MlpParams(**params), header["meta"]["n_features_in"])


class _Optimizer:
    def __init__(self, params: MlpParams, shapes_w, shapes_b):
        self.kind = params.optimizer
        self.lr = params.learning_rate
        self.t = 0
        zeros = lambda shapes: [np.zeros(s) for s in shapes]
        if self.kind == "adamw":
            self.m_w, self.v_w = zeros(shapes_w), zeros(shapes_w)
            self.m_b, self.v_b = zeros(shapes_b), zeros(shapes_b)
        elif self.kind == "rmsprop":
            self.acc_w, self.acc_b = zeros(shapes_w), zeros(shapes_b)

    def step(self, weights, biases, grads_w, grads_b) -> None:
        self.t += 1
        if self.kind == "sgd":
            for W, g in zip(weights, grads_w):
                W -= self.lr * g
            for b, g in zip(biases, grads_b):
                b -= self.lr * g
            return
        if self.kind == "rmsprop":
            for store, tensors, grads in ((self.acc_w, weights, grads_w),
                                          (self.acc_b, biases, grads_b)):
                for acc, w, g in zip(store, tensors, grads):
                    acc *= RMSPROP_RHO
                    acc += (1.0 - RMSPROP_RHO) * g * g
                    w -= self.lr * g / (np.sqrt(acc) + RMSPROP_EPS)
            return
        bc1 = 1.0 - ADAMW_BETA1 ** self.t
        bc2 = 1.0 - ADAMW_BETA2 ** self.t
        for decay, store_m, store_v, tensors, grads in (
            (True, self.m_w, self.v_w, weights, grads_w),
            (False, self.m_b, self.v_b, biases, grads_b),
        ):
            for m, v, w, g in zip(store_m, store_v, tensors, grads):
                m *= ADAMW_BETA1
                m += (1.0 - ADAMW_BETA1) * g
                v *= ADAMW_BETA2
                v += (1.0 - ADAMW_BETA2) * g * g
                w -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + ADAMW_EPS)
                if decay:
                    w -= self.lr * ADAMW_WEIGHT_DECAY * w


def init_mlp(n_features: int, n_labels: int, params: MlpParams) -> MlpModel:
    """Glorot-uniform weights, zero biases, from the seeded init stream."""
    params.validate()
    rng = np.random.default_rng([params.seed, 0])
    sizes = [n_features, *params.hidden_layers, n_labels]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases, params, n_features_in=n_features)


def fit_mlp(X, Y, params: MlpParams) -> MlpModel:
    Y = np.asarray(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    Y = (Y != 0).astype(np.float64)
    model = init_mlp(X.shape[1], Y.shape[1], params)
    shuffle_rng = np.random.default_rng([params.seed, 1])
    dropout_rng = np.random.default_rng([params.seed, 2])
    optimizer = _Optimizer(params, [w.shape for w in model.weights],
                           [b.shape for b in model.biases])

    n = X.shape[0]
    is_sparse = sp.issparse(X)
    X = X.tocsr() if is_sparse else np.asarray(X, dtype=np.float64)
    for _ in range(params.epochs):
        order = shuffle_rng.permutation(n)
        for batch_idx, start in enumerate(range(0, n, params.batch_size)):
            rows = order[start:start + params.batch_size]
            Xb = X[rows]
            rng = dropout_rng if params.dropout > 0 else None
            loss, grads_w, grads_b = model.loss_and_gradients(Xb, Y[rows], rng)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at batch {batch_idx}")
            optimizer.step(model.weights, model.biases, grads_w, grads_b)
    return model
