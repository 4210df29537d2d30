"""Second-order gradient boosting on logistic loss."""

import numpy as np
import pytest

from icd_coder.classifiers import (
    BoostingModel,
    BoostParams,
    fit_gradient_boosting,
    predict,
    predict_scores,
)
from icd_coder.metrics import evaluate


def logistic_loss(y, raw):
    p = 1.0 / (1.0 + np.exp(-raw))
    eps = 1e-12
    return float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))


TOY_X = np.array([[0.0], [0.2], [0.8], [1.0]])
TOY_Y = np.array([[0], [0], [1], [1]])


class TestFirstRound:
    def test_leaf_weights_match_hand_computation(self):
        # Round one: raw scores 0 so p = 0.5; g = p - y = [.5,.5,-.5,-.5],
        # h = p(1-p) = 0.25 per row. Splitting at 0.5 gives
        # GL = 1.0, HL = 0.5 -> wL = -1/(0.5 + lambda); right mirrors it.
        lam = 2.0
        params = BoostParams(n_estimators=1, learning_rate=1.0, max_depth=1,
                             reg_lambda=lam, min_child_weight=0.0, seed=0)
        model = fit_gradient_boosting(TOY_X, TOY_Y, params)
        tree = model.trees_per_label[0][0]
        leaf_values = sorted(tree.value[tree.feature == -1])
        expected = [-1.0 / (0.5 + lam), 1.0 / (0.5 + lam)]
        assert np.max(np.abs(np.array(leaf_values) - np.array(expected))) < 1e-9

    def test_l1_soft_threshold_applied(self):
        alpha = 0.3
        params = BoostParams(n_estimators=1, learning_rate=1.0, max_depth=1,
                             reg_alpha=alpha, reg_lambda=2.0, min_child_weight=0.0, seed=0)
        model = fit_gradient_boosting(TOY_X, TOY_Y, params)
        tree = model.trees_per_label[0][0]
        leaf_values = sorted(tree.value[tree.feature == -1])
        expected = [-(1.0 - alpha) / 2.5, (1.0 - alpha) / 2.5]
        assert np.max(np.abs(np.array(leaf_values) - np.array(expected))) < 1e-9

    def test_thresholdable_feature_reaches_perfect_training_accuracy(self):
        params = BoostParams(n_estimators=10, learning_rate=0.3, max_depth=2,
                             reg_lambda=1.0, min_child_weight=0.0, seed=0)
        model = fit_gradient_boosting(TOY_X, TOY_Y, params)
        assert predict(model, TOY_X).ravel().tolist() == [0, 0, 1, 1]


class TestRegularizationLimits:
    def test_huge_reg_lambda_drives_scores_to_half(self):
        params = BoostParams(n_estimators=5, reg_lambda=1e9, min_child_weight=0.0, seed=0)
        model = fit_gradient_boosting(TOY_X, TOY_Y, params)
        assert np.allclose(predict_scores(model, TOY_X), 0.5, atol=1e-6)

    def test_huge_gamma_prevents_all_splits(self):
        params = BoostParams(n_estimators=4, gamma=1e9, min_child_weight=0.0, seed=0)
        model = fit_gradient_boosting(TOY_X, TOY_Y, params)
        assert all(len(t.feature) == 1 for t in model.trees_per_label[0])
        # single-leaf trees still walk toward the base rate (0.5 here)
        scores = predict_scores(model, TOY_X)
        assert np.allclose(scores, scores[0, 0])

    def test_min_child_weight_blocks_small_children(self):
        # each row has h = 0.25 in round one; min_child_weight above the
        # whole side's hessian mass forbids the split
        params = BoostParams(n_estimators=1, max_depth=2, min_child_weight=0.6, seed=0)
        model = fit_gradient_boosting(TOY_X, TOY_Y, params)
        assert len(model.trees_per_label[0][0].feature) == 1


class TestTrainingDynamics:
    def test_per_label_loss_non_increasing_full_sample(self):
        rng = np.random.default_rng(0)
        X = rng.random((60, 5))
        Y = np.stack([(X[:, 0] > 0.5).astype(int),
                      ((X[:, 1] + 0.3 * X[:, 2]) > 0.6).astype(int)], axis=1)
        params = BoostParams(n_estimators=12, learning_rate=0.3, max_depth=3,
                             subsample=1.0, colsample_bytree=1.0, gamma=0.0,
                             reg_lambda=1.0, min_child_weight=0.0, seed=0)
        model = fit_gradient_boosting(X, Y, params)
        from icd_coder.classifiers.common import ColumnAccess
        columns = ColumnAccess(X)
        for l in range(Y.shape[1]):
            raw = np.zeros(len(X))
            losses = [logistic_loss(Y[:, l], raw)]
            for tree in model.trees_per_label[l]:
                raw = raw + params.learning_rate * tree.predict(columns)
                losses.append(logistic_loss(Y[:, l], raw))
            diffs = np.diff(losses)
            assert np.all(diffs <= 1e-12)

    def test_subsampled_fit_deterministic_per_seed(self):
        rng = np.random.default_rng(1)
        X = rng.random((50, 4))
        Y = (X[:, :2] > 0.5).astype(int)
        params = BoostParams(n_estimators=5, subsample=0.7, colsample_bytree=0.6, seed=9)
        a = fit_gradient_boosting(X, Y, params)
        b = fit_gradient_boosting(X, Y, params)
        assert np.array_equal(predict_scores(a, X), predict_scores(b, X))

    def test_zero_positive_label_constant_and_flagged(self):
        X = np.random.default_rng(2).random((30, 3))
        Y = np.zeros((30, 2), dtype=int)
        Y[:, 0] = (X[:, 0] > 0.5).astype(int)
        model = fit_gradient_boosting(X, Y, BoostParams(n_estimators=3, seed=0))
        assert model.flagged_labels == [1]
        assert np.all(predict_scores(model, X)[:, 1] == 0.0)

    def test_non_finite_features_rejected(self):
        X = np.array([[1.0], [np.nan]])
        with pytest.raises(ValueError, match="finite"):
            fit_gradient_boosting(X, np.array([[0], [1]]), BoostParams(seed=0))


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        X = rng.random((40, 4))
        Y = (X[:, :3] > 0.5).astype(int)
        model = fit_gradient_boosting(X, Y, BoostParams(n_estimators=4, max_depth=3, seed=5))
        path = tmp_path / "boost.icdm"
        model.save(path)
        back = BoostingModel.load(path)
        assert np.array_equal(predict_scores(model, X), predict_scores(back, X))
        assert back.params == model.params
        assert back.flagged_labels == model.flagged_labels

    def test_oracle_embedding_corpus_high_f1(self):
        from icd_coder.corpus import SyntheticSpec, generate_synthetic_corpus
        spec = SyntheticSpec(n_documents=300, n_labels=10, seed=8)
        dataset, oracle = generate_synthetic_corpus(spec)
        Y = dataset.label_matrix()
        params = BoostParams(n_estimators=6, learning_rate=0.5, max_depth=2,
                             min_child_weight=0.0, seed=0)
        model = fit_gradient_boosting(oracle.astype(np.float64), Y, params)
        rep = evaluate(Y, predict(model, oracle.astype(np.float64)))
        assert rep.f1_micro >= 0.99
