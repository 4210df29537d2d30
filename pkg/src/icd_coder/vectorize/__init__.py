"""Feature representations: sparse counts and TF-IDF, latent semantic
projection, topic proportions, paragraph vectors, and ingestion of externally
computed dense embeddings.

Fitted models are immutable; transform/infer operations are reentrant.
"""

from .bow import BowVectorizer, FitError, TfidfVectorizer, TokenVocabulary, fit_bow, fit_tfidf
from .embeddings import (
    EmbeddingFormatError,
    load_embeddings,
    read_emb1,
    read_ids,
    write_emb1,
    write_ids,
)
from .lda import LdaModel, fit_lda
from .lsa import LsaModel, RankError, fit_lsa
from .doc2vec import Doc2VecModel, train_doc2vec

__all__ = [
    "BowVectorizer",
    "Doc2VecModel",
    "EmbeddingFormatError",
    "FitError",
    "LdaModel",
    "LsaModel",
    "RankError",
    "TfidfVectorizer",
    "TokenVocabulary",
    "fit_bow",
    "fit_lda",
    "fit_lsa",
    "fit_tfidf",
    "load_embeddings",
    "read_emb1",
    "read_ids",
    "train_doc2vec",
    "write_emb1",
    "write_ids",
]
