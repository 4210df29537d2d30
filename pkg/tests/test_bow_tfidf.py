"""Count and TF-IDF vectorizers against an independently coded formula oracle."""

import math

import numpy as np
import pytest

from icd_coder.vectorize import FitError, fit_bow, fit_tfidf
from icd_coder.vectorize.bow import load_vectorizer


def tfidf_oracle(corpus, vocab_tokens):
    """Straight transcription of the weighting formula: smoothed idf
    tf * (ln((1+N)/(1+df)) + 1), then L2 row normalization."""
    n = len(corpus)
    df = {t: sum(1 for doc in corpus if t in doc) for t in vocab_tokens}
    rows = []
    for doc in corpus:
        weights = [doc.count(t) * (math.log((1 + n) / (1 + df[t])) + 1.0)
                   for t in vocab_tokens]
        norm = math.sqrt(sum(w * w for w in weights))
        rows.append([w / norm if norm > 0 else 0.0 for w in weights])
    return rows


class TestBow:
    def test_hand_counts(self):
        v = fit_bow([["a", "b", "a"], ["b", "c"]])
        X = v.transform([["a", "b", "a"], ["b", "c"]]).toarray()
        tokens = v.vocabulary.tokens()
        assert tokens == ["a", "b", "c"]
        assert X.tolist() == [[2, 1, 0], [0, 1, 1]]

    def test_max_df_excludes_ubiquitous_token(self):
        v = fit_bow([["a", "b", "a"], ["b", "c"]], max_df=0.5)
        assert "b" not in v.vocabulary.index
        assert set(v.vocabulary.index) == {"a", "c"}

    def test_min_df_absolute(self):
        v = fit_bow([["a", "b"], ["b"], ["b", "c"]], min_df=2)
        assert set(v.vocabulary.index) == {"b"}

    def test_max_features_top_by_corpus_frequency(self):
        corpus = [["a", "a", "a", "b", "b", "c"]]
        v = fit_bow(corpus, max_features=2)
        assert set(v.vocabulary.index) == {"a", "b"}

    def test_oov_transform_is_zero_row(self):
        v = fit_bow([["a", "b"]])
        X = v.transform([["z"]])
        assert X.shape == (1, 2) and X.nnz == 0

    def test_empty_corpus_fit_error(self):
        with pytest.raises(FitError):
            fit_bow([])

    def test_constraints_eliminating_all_tokens_fit_error(self):
        with pytest.raises(FitError):
            fit_bow([["a"], ["a"]], max_df=0.4)

    def test_no_explicit_zeros_stored(self):
        v = fit_bow([["a", "b"], ["b"]])
        X = v.transform([["a"], ["q"]])
        assert X.nnz == 1

    def test_save_load_round_trip(self, tmp_path):
        v = fit_bow([["a", "b", "a"], ["b", "c"]], max_features=3, min_df=1, max_df=1.0)
        path = tmp_path / "bow.json"
        v.save(path)
        v2 = load_vectorizer(path)
        X1 = v.transform([["a", "c", "c"]]).toarray()
        X2 = v2.transform([["a", "c", "c"]]).toarray()
        assert np.array_equal(X1, X2)
        assert v2.vocabulary.document_frequency.tolist() == v.vocabulary.document_frequency.tolist()


class TestTfidf:
    def test_single_doc_two_tokens_normalized(self):
        v = fit_tfidf([["a", "b"]])
        row = v.transform([["a", "b"]]).toarray()[0]
        assert np.allclose(row, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)

    def test_ubiquitous_token_has_minimum_idf(self):
        corpus = [["x", "a"], ["x", "b"], ["x", "c"], ["x", "d"]]
        v = fit_tfidf(corpus)
        idf = v.idf()
        x_col = v.vocabulary.index["x"]
        assert abs(idf[x_col] - 1.0) < 1e-15  # ln(5/5) + 1
        assert all(idf[j] > 1.0 for t, j in v.vocabulary.index.items() if t != "x")

    def test_all_oov_document_zero_norm_accepted(self):
        v = fit_tfidf([["a", "b"]])
        X = v.transform([["zz", "qq"]])
        assert X.nnz == 0

    def test_matches_formula_oracle_on_hand_corpus(self):
        corpus = [
            ["ansiedad", "generalizada", "cronica"],
            ["depresion", "mayor", "cronica", "cronica"],
            ["ansiedad", "panico"],
            ["depresion", "postparto"],
            ["trastorno", "adaptativo", "ansiedad"],
        ]
        v = fit_tfidf(corpus)
        tokens = v.vocabulary.tokens()
        X = v.transform(corpus).toarray()
        expected = tfidf_oracle(corpus, tokens)
        assert np.max(np.abs(X - np.array(expected))) < 1e-12

    def test_rows_unit_or_zero_norm(self):
        rng = np.random.default_rng(0)
        alphabet = [f"t{i}" for i in range(30)]
        corpus = [[alphabet[j] for j in rng.integers(0, 30, size=rng.integers(1, 15))]
                  for _ in range(40)]
        v = fit_tfidf(corpus, min_df=2)
        X = v.transform(corpus)
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1))).ravel()
        assert np.all((np.abs(norms - 1.0) < 1e-12) | (norms == 0.0))

    def test_fitted_transform_respects_df_constraints(self):
        rng = np.random.default_rng(1)
        alphabet = [f"t{i}" for i in range(50)]
        corpus = [[alphabet[j] for j in rng.integers(0, 50, size=10)] for _ in range(30)]
        v = fit_tfidf(corpus, max_features=20, min_df=2, max_df=0.8)
        df = v.vocabulary.document_frequency
        assert len(v.vocabulary) <= 20
        assert df.min() >= 2
        assert df.max() <= 0.8 * 30
