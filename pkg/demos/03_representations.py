"""Every text representation side by side on one synthetic corpus.

Sparse counts (BoW), smoothed TF-IDF, truncated-SVD coordinates (LSA), topic
proportions (LDA) and paragraph vectors (Doc2Vec) all implement the same
fit-on-train / transform-anything contract.
"""

import numpy as np

from icd_coder.corpus import SyntheticSpec, generate_synthetic_corpus
from icd_coder.preprocess import tokenize
from icd_coder.vectorize import fit_bow, fit_lda, fit_lsa, fit_tfidf, train_doc2vec

dataset, _ = generate_synthetic_corpus(
    SyntheticSpec(n_documents=400, n_labels=12, zipf_exponent=0.9, seed=3))
tokens = [tokenize(t) for t in dataset.texts]
train, probe = tokens[:300], tokens[300:]

bow = fit_bow(train, max_features=500, min_df=2, max_df=0.9)
X_bow = bow.transform(probe)
print(f"BoW:     {X_bow.shape}, sparse with {X_bow.nnz} stored counts")

tfidf = fit_tfidf(train, max_features=500, min_df=2, max_df=0.9)
X_tfidf = tfidf.transform(probe)
norms = np.sqrt(np.asarray(X_tfidf.multiply(X_tfidf).sum(axis=1))).ravel()
print(f"TF-IDF:  {X_tfidf.shape}, row norms in {{0, 1}}: "
      f"{np.all((np.abs(norms - 1) < 1e-12) | (norms == 0))}")

lsa = fit_lsa(tfidf.transform(train), n_components=24, seed=0)
X_lsa = lsa.project(X_tfidf)
print(f"LSA:     {X_lsa.shape}, top singular values {np.round(lsa.singular_values[:4], 3)}")

lda = fit_lda(bow.transform(train), n_topics=12, max_iter=15, seed=0)
X_lda = lda.infer(X_bow)
print(f"LDA:     {X_lda.shape}, rows sum to 1: "
      f"{np.allclose(X_lda.sum(axis=1), 1.0)}; "
      f"ELBO rose from {lda.elbo_history[0]:.0f} to {lda.elbo_history[-1]:.0f}")

d2v = train_doc2vec(train, vector_size=32, min_count=2, epochs=40, seed=0)
X_d2v = np.vstack([d2v.infer_vector(t) for t in probe])
print(f"Doc2Vec: {X_d2v.shape}, inference deterministic: "
      f"{np.array_equal(X_d2v[0], d2v.infer_vector(probe[0]))}")
