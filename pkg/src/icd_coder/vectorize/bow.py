"""Bag-of-words counts and the smoothed, L2-normalized TF-IDF variant.

Both vectorizers operate on pre-tokenized documents (lists of tokens) and
produce CSR matrices with no explicit zeros. Vocabulary pruning follows the
usual convention: document-frequency bounds first (``min_df`` absolute,
``max_df`` as a fraction of fitted documents), then ``max_features`` keeps the
top tokens by total corpus count. Columns are ordered alphabetically for
stable indices.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class FitError(ValueError):
    """Fitting could not produce a usable vocabulary."""


@dataclass(frozen=True)
class TokenVocabulary:
    """Token -> column index, with fit-time document frequencies."""

    index: dict[str, int]
    document_frequency: np.ndarray
    n_documents: int

    def __len__(self) -> int:
        return len(self.index)

    def tokens(self) -> list[str]:
        out = [""] * len(self.index)
        for tok, j in self.index.items():
            out[j] = tok
        return out


def _count_matrix(corpus: Sequence[Sequence[str]], index: dict[str, int]) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for tokens in corpus:
        row = Counter(index[t] for t in tokens if t in index)
        for j, c in sorted(row.items()):
            indices.append(j)
            data.append(float(c))
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(corpus), len(index)),
    )
    X.eliminate_zeros()
    return X


def _fit_vocabulary(
    corpus: Sequence[Sequence[str]],
    max_features: int | None,
    min_df: int,
    max_df: float,
) -> TokenVocabulary:
    if len(corpus) == 0:
        raise FitError("empty corpus")
    if min_df < 1:
        raise ValueError("min_df must be >= 1 (absolute document count)")
    if not 0.0 < max_df <= 1.0:
        raise ValueError("max_df must be in (0, 1] (fraction of documents)")
    if max_features is not None and max_features < 1:
        raise ValueError("max_features must be >= 1")

    n = len(corpus)
    df: Counter[str] = Counter()
    tf: Counter[str] = Counter()
    for tokens in corpus:
        tf.update(tokens)
        df.update(set(tokens))

    max_df_count = max_df * n
    kept = [t for t in df if df[t] >= min_df and df[t] <= max_df_count]
    if max_features is not None and len(kept) > max_features:
        kept.sort(key=lambda t: (-tf[t], t))
        kept = kept[:max_features]
    if not kept:
        raise FitError("document-frequency constraints eliminated every token")
    kept.sort()
    index = {t: j for j, t in enumerate(kept)}
    dfs = np.array([df[t] for t in kept], dtype=np.int64)
    return TokenVocabulary(index=index, document_frequency=dfs, n_documents=n)


class BowVectorizer:
    """Raw term counts over a fitted token vocabulary; OOV tokens ignored."""

    kind = "bow"

    def __init__(self, vocabulary: TokenVocabulary, max_features: int | None, min_df: int, max_df: float):
        self.vocabulary = vocabulary
        self.max_features = max_features
        self.min_df = min_df
        self.max_df = max_df

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def transform(self, corpus: Sequence[Sequence[str]]) -> sp.csr_matrix:
        return _count_matrix(corpus, self.vocabulary.index)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "version": 1,
            "params": {
                "max_features": self.max_features,
                "min_df": self.min_df,
                "max_df": self.max_df,
            },
            "n_documents": self.vocabulary.n_documents,
            "tokens": self.vocabulary.tokens(),
            "document_frequency": self.vocabulary.document_frequency.tolist(),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def _vocab_from_dict(cls, d: dict) -> TokenVocabulary:
        return TokenVocabulary(
            index={t: j for j, t in enumerate(d["tokens"])},
            document_frequency=np.array(d["document_frequency"], dtype=np.int64),
            n_documents=int(d["n_documents"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "BowVectorizer":
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        if d.get("kind") != cls.kind:
            raise ValueError(f"artifact kind {d.get('kind')!r}, expected {cls.kind!r}")
        p = d["params"]
        return cls(cls._vocab_from_dict(d), p["max_features"], p["min_df"], p["max_df"])


class TfidfVectorizer(BowVectorizer):
    """TF-IDF with smoothed idf and L2 row normalization.

    weight(t, d) = tf(t, d) * (ln((1 + N) / (1 + df(t))) + 1); rows without
    any in-vocabulary token stay all-zero (norm 0 accepted).
    """

    kind = "tfidf"

    def idf(self) -> np.ndarray:
        n = self.vocabulary.n_documents
        df = self.vocabulary.document_frequency.astype(np.float64)
        return np.log((1.0 + n) / (1.0 + df)) + 1.0

    def transform(self, corpus: Sequence[Sequence[str]]) -> sp.csr_matrix:
        X = _count_matrix(corpus, self.vocabulary.index)
        X = X.multiply(self.idf()).tocsr()
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        X = sp.diags(scale) @ X
        X = sp.csr_matrix(X)
        X.eliminate_zeros()
        return X

    @classmethod
    def load(cls, path: str | Path) -> "TfidfVectorizer":
        return super().load(path)  # type: ignore[return-value]


def fit_bow(
    corpus: Sequence[Sequence[str]],
    max_features: int | None = None,
    min_df: int = 1,
    max_df: float = 1.0,
) -> BowVectorizer:
    return BowVectorizer(_fit_vocabulary(corpus, max_features, min_df, max_df),
                         max_features, min_df, max_df)


def fit_tfidf(
    corpus: Sequence[Sequence[str]],
    max_features: int | None = None,
    min_df: int = 1,
    max_df: float = 1.0,
) -> TfidfVectorizer:
    return TfidfVectorizer(_fit_vocabulary(corpus, max_features, min_df, max_df),
                           max_features, min_df, max_df)


def load_vectorizer(path: str | Path) -> BowVectorizer:
    """Load either vectorizer artifact by its self-describing ``kind`` tag."""
    with open(path, "r", encoding="utf-8") as f:
        kind = json.load(f).get("kind")
    if kind == "bow":
        return BowVectorizer.load(path)
    if kind == "tfidf":
        return TfidfVectorizer.load(path)
    raise ValueError(f"unknown vectorizer artifact kind {kind!r}")
