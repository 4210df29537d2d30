"""Stratified splitting plus the three classifier families on one corpus.

The iterative stratifier keeps every label's positive counts proportional
across train/validation/test even under heavy imbalance; the classifiers
then score all labels simultaneously and are compared on micro/macro F1.
"""

import numpy as np

from icd_coder.classifiers import (
    BoostParams,
    ForestParams,
    MlpParams,
    fit_gradient_boosting,
    fit_mlp,
    fit_random_forest,
    predict,
)
from icd_coder.corpus import SyntheticSpec, generate_synthetic_corpus
from icd_coder.metrics import evaluate
from icd_coder.preprocess import tokenize
from icd_coder.splitter import iterative_stratified_split, partition_deviation_report
from icd_coder.vectorize import fit_tfidf

dataset, _ = generate_synthetic_corpus(
    SyntheticSpec(n_documents=800, n_labels=10, zipf_exponent=1.0,
                  paraphrase_noise=0.1, seed=5))
Y = dataset.label_matrix()
tags, warnings = iterative_stratified_split(Y, (0.70, 0.15, 0.15), seed=0)
report = partition_deviation_report(Y, tags)
print("split sizes:", np.bincount(tags, minlength=3).tolist())
print("all labels within stratification bounds:",
      all(r["within_bounds"] for r in report if r["support"] >= 2))
print()

tokens = [tokenize(t) for t in dataset.texts]
train, test = np.flatnonzero(tags == 0), np.flatnonzero(tags == 2)
vec = fit_tfidf([tokens[i] for i in train], max_features=600)
X_train, X_test = vec.transform([tokens[i] for i in train]), vec.transform(
    [tokens[i] for i in test])

models = {
    "random_forest": fit_random_forest(
        X_train, Y[train], ForestParams(n_estimators=15, max_depth=10, seed=0)),
    "xgboost": fit_gradient_boosting(
        X_train, Y[train], BoostParams(n_estimators=12, learning_rate=0.4,
                                       max_depth=3, min_child_weight=0.0, seed=0)),
    "mlp": fit_mlp(
        X_train, Y[train], MlpParams(hidden_layers=(64,), learning_rate=0.01,
                                     epochs=30, batch_size=32, seed=0)),
}

print(f"{'model':>14} | {'F1_micro':>8} | {'F1_macro':>8} | {'P_micro':>8} | {'R_micro':>8}")
for name, model in models.items():
    rep = evaluate(Y[test], predict(model, X_test))
    print(f"{name:>14} | {rep.f1_micro:8.4f} | {rep.f1_macro:8.4f} | "
          f"{rep.precision_micro:8.4f} | {rep.recall_micro:8.4f}")
