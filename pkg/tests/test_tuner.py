"""TPE sampler, study execution, journaling and the published presets."""

import numpy as np
import pytest

from icd_coder.tuner import (
    BEST_CONFIGURATIONS,
    CatDim,
    FloatDim,
    IntDim,
    SearchSpace,
    StudyError,
    TrialRecord,
    load_journal,
    preset,
    run_study,
    suggest,
    write_leaderboard_csv,
)

SPHERE = SearchSpace("sphere", (FloatDim("x", 0.0, 10.0), FloatDim("y", -10.0, 10.0)))


def sphere(p):
    return -(p["x"] - 3.0) ** 2 - (p["y"] + 1.0) ** 2


class TestSuggest:
    def test_empty_history_uniform_within_bounds(self):
        for i in range(50):
            p = suggest([], SPHERE, np.random.default_rng([0, i]))
            assert 0.0 <= p["x"] <= 10.0 and -10.0 <= p["y"] <= 10.0

    def test_good_density_tracks_cluster_near_three(self):
        rng = np.random.default_rng(0)
        history = []
        for i in range(40):
            x = float(rng.uniform(0, 10))
            history.append(TrialRecord(i, {"x": x}, -(x - 3.0) ** 2, "complete"))
        space = SearchSpace("one", (FloatDim("x", 0.0, 10.0),))
        good = sorted(history, key=lambda t: -t.objective)[:10]
        good_mean = np.mean([t.params["x"] for t in good])
        assert 2.0 <= good_mean <= 4.0
        draws = [suggest(history, space, np.random.default_rng([7, i]))["x"]
                 for i in range(100)]
        assert all(0.0 <= d <= 10.0 for d in draws)
        assert abs(np.mean(draws) - 3.0) <= 1.5

    def test_categorical_prefers_consistent_winner(self):
        space = SearchSpace("cat", (CatDim("c", ("a", "b")),))
        history = [TrialRecord(i, {"c": "a" if i % 2 == 0 else "b"},
                               1.0 if i % 2 == 0 else 0.0, "complete")
                   for i in range(30)]
        picks = [suggest(history, space, np.random.default_rng([11, i]))["c"]
                 for i in range(200)]
        assert picks.count("a") / 200 > 0.7

    def test_every_point_respects_grid_and_conditions(self):
        space = preset("mlp")
        history = []
        for i in range(60):
            rng = np.random.default_rng([3, i])
            params = suggest(history, space, rng)
            space.validate_point(params)
            n_layers = params["n_layers"]
            for j in range(3):
                assert (f"n_units_l{j}" in params) == (j < n_layers)
                if f"n_units_l{j}" in params:
                    assert params[f"n_units_l{j}"] % 32 == 0
            history.append(TrialRecord(i, params,
                                       float(np.random.default_rng(i).random()),
                                       "complete"))

    def test_log_dimension_stays_in_bounds(self):
        space = preset("xgboost")
        history = []
        for i in range(40):
            params = suggest(history, space, np.random.default_rng([5, i]))
            assert 1e-3 <= params["learning_rate"] <= 0.3
            history.append(TrialRecord(i, params, float(i % 7), "complete"))

    def test_failed_trials_excluded_from_model(self):
        space = SearchSpace("one", (FloatDim("x", 0.0, 10.0),))
        history = [TrialRecord(i, {"x": 5.0}, None, "failed") for i in range(30)]
        # all failed -> still uniform sampling, no crash
        p = suggest(history, space, np.random.default_rng([1, 30]))
        assert 0.0 <= p["x"] <= 10.0


class TestRunStudy:
    def test_single_trial_is_best(self):
        res = run_study(sphere, SPHERE, n_trials=1, seed=0)
        assert res.best is res.trials[0]

    def test_constant_objective_no_crash(self):
        res = run_study(lambda p: 1.0, SPHERE, n_trials=15, seed=0)
        assert res.best.objective == 1.0

    def test_beats_random_search_on_sphere(self):
        tpe_best, random_best = [], []
        for seed in range(20):
            res = run_study(sphere, SPHERE, n_trials=60, seed=seed)
            tpe_best.append(res.best.objective)
            best = -np.inf
            for i in range(60):
                rng = np.random.default_rng([seed + 1000, i])
                best = max(best, sphere({"x": rng.uniform(0, 10),
                                         "y": rng.uniform(-10, 10)}))
            random_best.append(best)
        assert np.median(tpe_best) > np.median(random_best)

    def test_median_best_x_near_three(self):
        space = SearchSpace("one", (FloatDim("x", 0.0, 10.0),))
        best_x = [run_study(lambda p: -(p["x"] - 3.0) ** 2, space, 50, seed=s).best.params["x"]
                  for s in range(20)]
        assert 2.5 <= np.median(best_x) <= 3.5

    def test_deterministic_for_fixed_seed(self):
        a = run_study(sphere, SPHERE, n_trials=25, seed=9)
        b = run_study(sphere, SPHERE, n_trials=25, seed=9)
        assert [t.params for t in a.trials] == [t.params for t in b.trials]
        assert a.best.trial_id == b.best.trial_id

    def test_failed_trials_recorded_and_study_continues(self):
        def flaky(p):
            if p["x"] < 5.0:
                raise RuntimeError("boom")
            return p["x"]
        space = SearchSpace("one", (FloatDim("x", 0.0, 10.0),))
        res = run_study(flaky, space, n_trials=30, seed=1)
        statuses = {t.status for t in res.trials}
        assert statuses == {"complete", "failed"}
        assert res.best.objective >= 5.0

    def test_all_failed_raises(self):
        def bad(p):
            raise RuntimeError("nope")
        with pytest.raises(StudyError):
            run_study(bad, SPHERE, n_trials=3, seed=0)

    def test_journal_replay_resumes_identically(self, tmp_path):
        journal = tmp_path / "journal.jsonl"
        full = run_study(sphere, SPHERE, n_trials=20, seed=3,
                         journal_path=tmp_path / "full.jsonl")
        partial = run_study(sphere, SPHERE, n_trials=7, seed=3, journal_path=journal)
        assert len(partial.trials) == 7
        resumed = run_study(sphere, SPHERE, n_trials=20, seed=3, journal_path=journal)
        assert [t.params for t in resumed.trials] == [t.params for t in full.trials]
        assert len(load_journal(journal)) == 20

    def test_leaderboard_top_row_is_best_trial(self, tmp_path):
        res = run_study(sphere, SPHERE, n_trials=12, seed=2)
        path = tmp_path / "board.csv"
        write_leaderboard_csv(path, res)
        import csv
        rows = list(csv.reader(open(path, encoding="utf-8")))
        assert rows[0] == ["configuration", "parameter", "value"]
        assert f"trial{res.best.trial_id}_" in rows[1][0]
        assert rows[1][1] == "objective"
        assert abs(float(rows[1][2]) - res.best.objective) < 1e-15


class TestPresets:
    def test_unknown_name_lists_valid(self):
        with pytest.raises(ValueError, match="bow"):
            preset("elmo")

    def test_xgboost_bounds(self):
        dims = {d.name: d for d in preset("xgboost").dimensions}
        assert (dims["n_estimators"].low, dims["n_estimators"].high) == (100, 800)
        assert (dims["max_depth"].low, dims["max_depth"].high) == (3, 12)
        assert dims["learning_rate"].log and dims["learning_rate"].low == 1e-3
        assert (dims["subsample"].low, dims["subsample"].high) == (0.5, 1.0)
        assert (dims["gamma"].low, dims["gamma"].high) == (0.0, 5.0)
        assert (dims["reg_alpha"].low, dims["reg_alpha"].high) == (0.0, 10.0)
        assert (dims["reg_lambda"].low, dims["reg_lambda"].high) == (0.0, 10.0)
        assert (dims["min_child_weight"].low, dims["min_child_weight"].high) == (1, 10)

    def test_lsa_components_grid(self):
        dims = {d.name: d for d in preset("lsa").dimensions}
        d = dims["n_components"]
        assert (d.low, d.high, d.step) == (50, 500, 50)
        assert (dims["max_features"].low, dims["max_features"].high,
                dims["max_features"].step) == (1000, 10000, 500)

    def test_finetune_block(self):
        dims = {d.name: d for d in preset("finetune").dimensions}
        assert dims["lr"].log and (dims["lr"].low, dims["lr"].high) == (1e-6, 5e-5)
        assert (dims["lr_head"].low, dims["lr_head"].high) == (1e-4, 5e-3)
        assert dims["hidden_dim"].step == 128
        assert (dims["hidden_dim"].low, dims["hidden_dim"].high) == (256, 1536)
        assert dims["batch_size"].choices == (8, 16)
        assert (dims["pos_weight_alpha"].low, dims["pos_weight_alpha"].high) == (0.0, 1.0)
        assert (dims["frozen_epochs"].low, dims["frozen_epochs"].high) == (1, 3)
        assert (dims["warmup_percentage"].low, dims["warmup_percentage"].high) == (0.0, 0.2)
        assert (dims["max_grad_norm"].low, dims["max_grad_norm"].high) == (0.2, 1.0)

    def test_vocabulary_presets_share_trio(self):
        for name in ("bow", "tfidf"):
            dims = {d.name: d for d in preset(name).dimensions}
            assert (dims["min_df"].low, dims["min_df"].high) == (1, 5)
            assert (dims["max_df"].low, dims["max_df"].high) == (0.80, 0.99)

    def test_doc2vec_grid(self):
        dims = {d.name: d for d in preset("doc2vec").dimensions}
        assert (dims["vector_size"].low, dims["vector_size"].high,
                dims["vector_size"].step) == (100, 500, 50)
        assert (dims["epochs"].low, dims["epochs"].high, dims["epochs"].step) == (20, 100, 10)

    def test_random_forest_ranges(self):
        dims = {d.name: d for d in preset("random_forest").dimensions}
        assert (dims["n_estimators"].low, dims["n_estimators"].high) == (5, 50)
        assert (dims["max_depth"].low, dims["max_depth"].high) == (5, 25)
        assert (dims["min_samples_split"].low, dims["min_samples_split"].high) == (2, 6)
        assert (dims["min_samples_leaf"].low, dims["min_samples_leaf"].high) == (1, 4)

    def test_mlp_ranges(self):
        dims = {d.name: d for d in preset("mlp").dimensions}
        assert (dims["n_layers"].low, dims["n_layers"].high) == (0, 3)
        assert dims["epochs"].low == 10 and dims["epochs"].high == 40
        assert dims["batch_size"].choices == (32, 64, 128)
        assert dims["dropout"].step == 0.1 and dims["dropout"].high == 0.5
        assert dims["learning_rate"].log

    def test_lda_ranges(self):
        dims = {d.name: d for d in preset("lda").dimensions}
        assert (dims["n_topics"].low, dims["n_topics"].high, dims["n_topics"].step) == (10, 100, 10)
        assert (dims["max_iter"].low, dims["max_iter"].high, dims["max_iter"].step) == (10, 50, 10)

    def test_reference_best_configurations_shape(self):
        assert set(BEST_CONFIGURATIONS) == {
            "finetune_e5_large", "mlt_xgboost_e5_large", "mlt_xgboost_bio_lord",
            "mlt_xgboost_e5_base", "mlt_xgboost_paraphrase_multilingual",
        }
        ft = BEST_CONFIGURATIONS["finetune_e5_large"]
        assert ft["hidden_dim"] == 1280 and ft["epochs"] == 15
        assert ft["pos_weight_alpha"] == 0.0 and ft["max_grad_norm"] == 1.0
        xgb = BEST_CONFIGURATIONS["mlt_xgboost_e5_large"]
        assert xgb["n_estimators"] == 759 and xgb["min_child_weight"] == 10


class TestTrialRecord:
    def test_complete_requires_objective(self):
        with pytest.raises(ValueError):
            TrialRecord(0, {}, None, "complete")

    def test_json_round_trip(self):
        t = TrialRecord(3, {"x": 1.5, "c": "a"}, 0.25, "complete", wall_time=0.1)
        back = TrialRecord.from_json(t.to_json())
        assert back == t
