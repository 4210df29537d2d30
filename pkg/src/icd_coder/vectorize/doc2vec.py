"""Paragraph vectors trained with the distributed bag-of-words objective.

Each document owns a trainable vector that must predict the document's words
through a sigmoid against output token vectors, with negative samples drawn
from the unigram^0.75 distribution. Updates are batched per document; the
learning rate decays linearly from its initial value over all document visits.
Inference freezes the output vectors and runs the same objective on a fresh
document vector.
"""

from __future__ import annotations

import zlib
from collections import Counter
from typing import Sequence

import numpy as np

NEGATIVE_SAMPLES = 5
INITIAL_LEARNING_RATE = 0.025
MIN_LEARNING_RATE = 1e-4
DEFAULT_INFER_STEPS = 50


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


class Doc2VecModel:
    """Trained document vectors plus the frozen output token table."""

    def __init__(
        self,
        vector_size: int,
        token_index: dict[str, int],
        output_vectors: np.ndarray,
        doc_vectors: np.ndarray,
        noise_distribution: np.ndarray,
        epochs: int,
        min_count: int,
        seed: int,
    ):
        self.vector_size = vector_size
        self.token_index = token_index
        self.output_vectors = output_vectors
        self.doc_vectors = doc_vectors
        self.noise_distribution = noise_distribution
        self.epochs = epochs
        self.min_count = min_count
        self.seed = seed

    def _token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.token_index[t] for t in tokens if t in self.token_index],
                        dtype=np.int64)

    def infer_vector(self, tokens: Sequence[str], steps: int = DEFAULT_INFER_STEPS) -> np.ndarray:
        """Gradient steps on a fresh vector with frozen token table.

        Deterministic: the initialization stream is derived from the model
        seed and the token sequence. ``steps=0`` returns the seeded
        initialization vector.
        """
        key = zlib.crc32(" ".join(tokens).encode("utf-8"))
        rng = np.random.default_rng([self.seed, key])
        vec = (rng.random(self.vector_size) - 0.5) / self.vector_size
        ids = self._token_ids(tokens)
        if ids.size == 0:
            return vec
        lr = INITIAL_LEARNING_RATE
        for step in range(steps):
            vec = self._train_doc(vec, ids, rng, lr, update_tokens=False)
            lr = max(MIN_LEARNING_RATE,
                     INITIAL_LEARNING_RATE * (1.0 - (step + 1) / max(steps, 1)))
        return vec

    def _train_doc(self, vec: np.ndarray, ids: np.ndarray, rng: np.random.Generator,
                   lr: float, update_tokens: bool) -> np.ndarray:
        """One pass over a document's tokens: positive + negative pairs,
        gradients accumulated over the document then applied once."""
        negatives = rng.choice(len(self.noise_distribution),
                               size=(ids.size, NEGATIVE_SAMPLES),
                               p=self.noise_distribution)
        targets = np.concatenate([ids[:, None], negatives], axis=1)  # (T, 1+neg)
        labels = np.zeros_like(targets, dtype=np.float64)
        labels[:, 0] = 1.0
        U = self.output_vectors[targets]                      # (T, 1+neg, D)
        s = _sigmoid(U @ vec)                                 # (T, 1+neg)
        g = (s - labels) * lr
        grad_vec = np.einsum("tn,tnd->d", g, U)
        if update_tokens:
            flat = targets.ravel()
            np.add.at(self.output_vectors, flat, -g.ravel()[:, None] * vec[None, :])
        return vec - grad_vec


def train_doc2vec(
    corpus: Sequence[Sequence[str]],
    vector_size: int,
    min_count: int = 1,
    epochs: int = 40,
    seed: int = 0,
) -> Doc2VecModel:
    """Train document vectors on a tokenized corpus. Deterministic per seed."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if vector_size < 1:
        raise ValueError("vector_size must be >= 1")
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    kept = sorted(t for t, c in counts.items() if c >= min_count)
    if not kept:
        raise ValueError(f"no token reaches min_count={min_count}")
    token_index = {t: j for j, t in enumerate(kept)}

    freq = np.array([counts[t] for t in kept], dtype=np.float64) ** 0.75
    noise = freq / freq.sum()

    rng = np.random.default_rng(seed)
    doc_vectors = (rng.random((len(corpus), vector_size)) - 0.5) / vector_size
    output_vectors = np.zeros((len(kept), vector_size))

    model = Doc2VecModel(
        vector_size=vector_size,
        token_index=token_index,
        output_vectors=output_vectors,
        doc_vectors=doc_vectors,
        noise_distribution=noise,
        epochs=epochs,
        min_count=min_count,
        seed=seed,
    )
    doc_ids = [model._token_ids(tokens) for tokens in corpus]

    total_visits = epochs * max(len(corpus), 1)
    visit = 0
    for _ in range(epochs):
        for d, ids in enumerate(doc_ids):
            lr = max(MIN_LEARNING_RATE,
                     INITIAL_LEARNING_RATE * (1.0 - visit / total_visits))
            visit += 1
            if ids.size == 0:
                continue
            doc_vectors[d] = model._train_doc(doc_vectors[d], ids, rng, lr,
                                              update_tokens=True)
    return model
