"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line with the measured quantity (run with ``pytest -s`` to see them).

The reference numbers from the source study's private corpus are not
reproducible here, so the criteria are property-based plus directional
synthetic-scale checks; every tolerance is asserted exactly as stated.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from icd_coder.classifiers import (
    BoostParams,
    ForestParams,
    MlpParams,
    fit_gradient_boosting,
    fit_mlp,
    fit_random_forest,
    init_mlp,
    predict,
)
from icd_coder.classifiers.common import ColumnAccess
from icd_coder.corpus import SyntheticSpec, generate_synthetic_corpus, save_dataset
from icd_coder.metrics import confusion_counts, evaluate, per_label_scores
from icd_coder.pipeline import PipelineConfig, run_pipeline
from icd_coder.preprocess import tokenize
from icd_coder.splitter import iterative_stratified_split, partition_deviation_report
from icd_coder.tuner import FloatDim, SearchSpace, run_study
from icd_coder.vectorize import fit_lda, fit_lsa, fit_tfidf, write_emb1, write_ids

from test_metrics import brute_force_metrics
from test_bow_tfidf import tfidf_oracle
from test_lsa_lda import two_block_corpus


def _ok(name: str, detail: str) -> None:
    print(f"\nACCEPTANCE PASS [{name}]: {detail}")


@pytest.fixture(scope="module")
def zipf_corpus():
    spec = SyntheticSpec(n_documents=10000, n_labels=85, zipf_exponent=1.1,
                         keywords_per_label=3, paraphrase_noise=0.2,
                         multi_label_rate=0.3, seed=11)
    return generate_synthetic_corpus(spec)


@pytest.fixture(scope="module")
def corpus_dir(zipf_corpus, tmp_path_factory):
    dataset, oracle = zipf_corpus
    root = tmp_path_factory.mktemp("acceptance_corpus")
    save_dataset(root / "dataset.jsonl", dataset)
    import csv as _csv
    with open(root / "vocabulary.csv", "w", newline="", encoding="utf-8") as f:
        w = _csv.writer(f)
        w.writerow(["code", "description"])
        w.writerows(dataset.vocabulary.entries)
    write_emb1(root / "oracle.emb1", oracle)
    write_ids(root / "oracle.ids", dataset.ids)
    return root


def _pipeline_config(corpus_dir, out_dir, representation, classifier, seed=11):
    return PipelineConfig.from_dict({
        "dataset": str(corpus_dir / "dataset.jsonl"),
        "vocabulary": str(corpus_dir / "vocabulary.csv"),
        "preprocess": {"expand_codes": False},
        "split": {"ratios": [0.7, 0.15, 0.15]},
        "representation": representation,
        "classifier": classifier,
        "threshold": 0.5,
        "seed": seed,
        "out_dir": str(out_dir),
    })


def test_metric_oracle_equivalence():
    """200 randomized pairs, 85 labels x <=1000 docs, 1e-12 vs brute force."""
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 1001))
        y_true = (rng.random((n, 85)) < rng.uniform(0.01, 0.1)).astype(np.int8)
        y_pred = (rng.random((n, 85)) < rng.uniform(0.01, 0.1)).astype(np.int8)
        rep = evaluate(y_true, y_pred)
        *_, p, r, f1, fm = brute_force_metrics(y_true.tolist(), y_pred.tolist())
        worst = max(worst,
                    abs(rep.precision_micro - p), abs(rep.recall_micro - r),
                    abs(rep.f1_micro - f1), abs(rep.f1_macro - fm))
    elapsed = time.perf_counter() - start
    assert worst < 1e-12
    assert elapsed < 10.0
    _ok("metric-oracle", f"max deviation {worst:.2e} over 200 pairs in {elapsed:.1f}s")


def test_tfidf_exactness():
    """5-document hand corpus vs independently coded formula oracle, 1e-12."""
    corpus = [
        ["ansiedad", "generalizada", "cronica"],
        ["depresion", "mayor", "cronica", "cronica"],
        ["ansiedad", "panico"],
        ["depresion", "postparto"],
        ["trastorno", "adaptativo", "ansiedad"],
    ]
    vec = fit_tfidf(corpus)
    got = vec.transform(corpus).toarray()
    expected = np.array(tfidf_oracle(corpus, vec.vocabulary.tokens()))
    worst = float(np.max(np.abs(got - expected)))
    assert worst < 1e-12
    _ok("tfidf-exactness", f"max |delta| {worst:.2e}")


def test_lsa_fidelity():
    """Top-10 singular values of 50x40 and 100x100 vs dense SVD, 1e-6 rel."""
    worst = 0.0
    for shape, seed in (((50, 40), 1), ((100, 100), 2)):
        X = np.random.default_rng(seed).standard_normal(shape)
        model = fit_lsa(X, 10, seed=seed)
        oracle = np.linalg.svd(X, compute_uv=False)[:10]
        worst = max(worst, float(np.max(np.abs(model.singular_values - oracle) / oracle)))
    assert worst < 1e-6
    _ok("lsa-fidelity", f"max relative error {worst:.2e}")


def test_lda_sanity():
    """Two-block 200-doc corpus: >=90% dominant-topic agreement; rows sum to 1."""
    counts, membership = two_block_corpus(n_docs=200, vocab_half=15, seed=3)
    model = fit_lda(sp.csr_matrix(counts), n_topics=2, max_iter=40, seed=0)
    theta = model.infer(sp.csr_matrix(counts))
    dominant = np.argmax(theta, axis=1)
    agreement = max(np.mean(dominant == membership), np.mean(dominant != membership))
    row_err = float(np.max(np.abs(model.topic_word.sum(axis=1) - 1.0)))
    assert agreement >= 0.9
    assert row_err < 1e-9
    _ok("lda-sanity", f"block agreement {agreement:.3f}, row-sum error {row_err:.1e}")


def test_split_stratification(zipf_corpus):
    """10k-doc 85-label Zipf corpus: +-1 / 10%-relative bounds; deterministic."""
    dataset, _ = zipf_corpus
    Y = dataset.label_matrix()
    tags, _ = iterative_stratified_split(Y, (0.70, 0.15, 0.15), seed=5)
    report = partition_deviation_report(Y, tags, (0.70, 0.15, 0.15))
    failing = [r for r in report if r["support"] >= 2 and not r["within_bounds"]]
    assert failing == []
    tags_again, _ = iterative_stratified_split(Y, (0.70, 0.15, 0.15), seed=5)
    assert np.array_equal(tags, tags_again)
    _ok("split-stratification",
        f"all {sum(1 for r in report if r['support'] >= 2)} labels within bounds; rerun identical")


def test_mlp_gradient_check():
    """Analytic vs central finite differences on a 3x4x2 net, <=1e-4 rel."""
    model = init_mlp(3, 2, MlpParams(hidden_layers=(4,), dropout=0.0, seed=3))
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 3))
    Y = (rng.random((6, 2)) > 0.5).astype(float)
    _, gw, gb = model.loss_and_gradients(X, Y)
    eps = 1e-5
    worst = 0.0
    for store, grads in ((model.weights, gw), (model.biases, gb)):
        for W, G in zip(store, grads):
            it = np.nditer(W, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = W[idx]
                W[idx] = orig + eps
                lp, _, _ = model.loss_and_gradients(X, Y)
                W[idx] = orig - eps
                lm, _, _ = model.loss_and_gradients(X, Y)
                W[idx] = orig
                fd = (lp - lm) / (2 * eps)
                worst = max(worst, abs(fd - G[idx]) / max(abs(fd), abs(G[idx]), 1e-8))
    assert worst <= 1e-4
    _ok("mlp-gradient", f"max relative error {worst:.2e}")


def test_boosting_correctness():
    """First-round leaf weights match -G/(H+lambda) by hand (1e-9); training
    loss non-increasing with subsample=colsample=1, gamma=0."""
    X = np.array([[0.0], [0.2], [0.8], [1.0]])
    Y = np.array([[0], [0], [1], [1]])
    lam = 2.0
    model = fit_gradient_boosting(
        X, Y, BoostParams(n_estimators=1, learning_rate=1.0, max_depth=1,
                          reg_lambda=lam, min_child_weight=0.0, seed=0))
    tree = model.trees_per_label[0][0]
    got = sorted(tree.value[tree.feature == -1])
    expected = [-1.0 / (0.5 + lam), 1.0 / (0.5 + lam)]
    leaf_dev = float(np.max(np.abs(np.array(got) - np.array(expected))))
    assert leaf_dev < 1e-9

    rng = np.random.default_rng(0)
    Xl = rng.random((80, 4))
    Yl = np.stack([(Xl[:, 0] > 0.5).astype(int),
                   (Xl[:, 1] + Xl[:, 2] > 1.0).astype(int)], axis=1)
    params = BoostParams(n_estimators=15, learning_rate=0.3, max_depth=3,
                         subsample=1.0, colsample_bytree=1.0, gamma=0.0,
                         reg_lambda=1.0, min_child_weight=0.0, seed=0)
    boosted = fit_gradient_boosting(Xl, Yl, params)
    columns = ColumnAccess(Xl)
    worst_increase = -np.inf
    for l in range(2):
        raw = np.zeros(len(Xl))
        prev = np.inf
        for tree in boosted.trees_per_label[l]:
            raw = raw + params.learning_rate * tree.predict(columns)
            p = 1.0 / (1.0 + np.exp(-raw))
            loss = float(-np.mean(Yl[:, l] * np.log(p + 1e-12)
                                  + (1 - Yl[:, l]) * np.log(1 - p + 1e-12)))
            worst_increase = max(worst_increase, loss - prev)
            prev = loss
    assert worst_increase <= 1e-12
    _ok("boosting-correctness",
        f"leaf deviation {leaf_dev:.1e}; max per-round loss increase {worst_increase:.1e}")


def test_tpe_effectiveness():
    """f(x,y) = -(x-3)^2 - (y+1)^2, budget 60, 20 seeds: TPE median best
    strictly beats uniform random search's median."""
    space = SearchSpace("sphere", (FloatDim("x", 0.0, 10.0), FloatDim("y", -10.0, 10.0)))

    def f(p):
        return -(p["x"] - 3.0) ** 2 - (p["y"] + 1.0) ** 2

    tpe_best, random_best = [], []
    for seed in range(20):
        tpe_best.append(run_study(f, space, n_trials=60, seed=seed).best.objective)
        best = -np.inf
        for i in range(60):
            rng = np.random.default_rng([seed + 1000, i])
            best = max(best, f({"x": rng.uniform(0, 10), "y": rng.uniform(-10, 10)}))
        random_best.append(best)
    tpe_median, random_median = np.median(tpe_best), np.median(random_best)
    assert tpe_median > random_median
    _ok("tpe-effectiveness",
        f"TPE median {tpe_median:.4f} > random median {random_median:.4f}")


def test_end_to_end_tfidf_mlp(corpus_dir, tmp_path):
    """TF-IDF + MLP on the 10k synthetic corpus: test F1_micro >= 0.90 in
    under 5 minutes; identical seeds give identical reports."""
    representation = {"name": "tfidf",
                      "params": {"max_features": 2000, "min_df": 1, "max_df": 0.9}}
    classifier = {"name": "mlp",
                  "params": {"hidden_layers": [256], "learning_rate": 0.001,
                             "batch_size": 64, "epochs": 25, "optimizer": "adamw"}}
    start = time.perf_counter()
    report = run_pipeline(_pipeline_config(corpus_dir, tmp_path / "run1",
                                           representation, classifier))
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    assert report.test.f1_micro >= 0.90

    rerun = run_pipeline(_pipeline_config(corpus_dir, tmp_path / "run2",
                                          representation, classifier))
    assert rerun.test.summary() == report.test.summary()
    assert rerun.validation.summary() == report.validation.summary()
    _ok("end-to-end", f"test F1_micro {report.test.f1_micro:.4f} in {elapsed:.0f}s; "
        f"rerun identical")


def test_directional_ranking_echo(corpus_dir, tmp_path):
    """Oracle dense embeddings + boosting >= BoW + random forest on test
    F1_micro; the forest's micro precision >= its micro recall."""
    forest_report = run_pipeline(_pipeline_config(
        corpus_dir, tmp_path / "bow_rf",
        {"name": "bow", "params": {"max_features": 2000, "min_df": 1, "max_df": 0.9}},
        {"name": "random_forest",
         "params": {"n_estimators": 15, "max_depth": 12, "max_features": "sqrt",
                    "bootstrap": True}},
    ))
    boost_report = run_pipeline(_pipeline_config(
        corpus_dir, tmp_path / "oracle_xgb",
        {"name": "embeddings", "matrix": str(corpus_dir / "oracle.emb1"),
         "ids": str(corpus_dir / "oracle.ids")},
        {"name": "xgboost",
         "params": {"n_estimators": 8, "learning_rate": 0.5, "max_depth": 3,
                    "min_child_weight": 1.0}},
    ))
    assert boost_report.test.f1_micro >= forest_report.test.f1_micro
    assert forest_report.test.precision_micro >= forest_report.test.recall_micro
    _ok("directional-ranking",
        f"oracle+boosting {boost_report.test.f1_micro:.4f} >= "
        f"bow+forest {forest_report.test.f1_micro:.4f}; forest P_micro "
        f"{forest_report.test.precision_micro:.4f} >= R_micro "
        f"{forest_report.test.recall_micro:.4f}")


def test_per_class_variance_of_rare_labels():
    """Labels with <=5 positives show strictly higher test-F1 variance across
    10 seeds than the 10 most frequent labels."""
    spec = SyntheticSpec(n_documents=2000, n_labels=85, zipf_exponent=1.6,
                         paraphrase_noise=0.2, multi_label_rate=0.3, seed=21)
    dataset, _ = generate_synthetic_corpus(spec)
    Y = dataset.label_matrix()
    support = Y.sum(axis=0)
    rare = np.flatnonzero(support <= 5)
    frequent = np.argsort(-support)[:10]
    assert rare.size > 0
    tokens = [tokenize(t) for t in dataset.texts]

    per_seed_f1 = []
    for seed in range(10):
        tags, _ = iterative_stratified_split(Y, seed=seed)
        train, test = np.flatnonzero(tags == 0), np.flatnonzero(tags == 2)
        vec = fit_tfidf([tokens[i] for i in train])
        X_train = vec.transform([tokens[i] for i in train])
        X_test = vec.transform([tokens[i] for i in test])
        model = fit_mlp(X_train, Y[train],
                        MlpParams(hidden_layers=(64,), epochs=25, learning_rate=0.01,
                                  batch_size=64, seed=seed))
        counts = confusion_counts(Y[test], predict(model, X_test))
        _, _, f1 = per_label_scores(counts)
        per_seed_f1.append(f1)
    variance = np.vstack(per_seed_f1).var(axis=0)
    rare_var = float(variance[rare].mean())
    frequent_var = float(variance[frequent].mean())
    assert rare_var > frequent_var
    _ok("per-class-variance",
        f"rare-label F1 variance {rare_var:.5f} > top-10 variance {frequent_var:.6f}")
