"""Sequential model-based hyperparameter search with the shipped presets.

A TPE study maximizes a toy objective, then a real (small) study tunes the
boosting preset on a synthetic corpus, journaling every trial so the study
can resume after an interruption.
"""

import tempfile
from pathlib import Path

import numpy as np

from icd_coder.tuner import (
    BEST_CONFIGURATIONS,
    FloatDim,
    SearchSpace,
    load_journal,
    preset,
    run_study,
    write_leaderboard_csv,
)

# --- TPE on a known optimum -------------------------------------------------
space = SearchSpace("sphere", (FloatDim("x", 0.0, 10.0), FloatDim("y", -10.0, 10.0)))
study = run_study(lambda p: -(p["x"] - 3) ** 2 - (p["y"] + 1) ** 2,
                  space, n_trials=60, seed=1)
print(f"sphere optimum near (3, -1): best trial {study.best.trial_id} -> "
      f"x={study.best.params['x']:.2f} y={study.best.params['y']:.2f} "
      f"objective={study.best.objective:.4f}")

# --- the published search spaces ---------------------------------------------
xgb_space = preset("xgboost")
print("\nxgboost preset dimensions:")
for dim in xgb_space.dimensions:
    print(f"  {dim.name}: {dim}")

print("\nreference best configuration (dense-embedding boosting):")
for key, value in BEST_CONFIGURATIONS["mlt_xgboost_e5_large"].items():
    print(f"  {key} = {value}")

# --- journaling and resumption ----------------------------------------------
with tempfile.TemporaryDirectory() as tmp:
    journal = Path(tmp) / "journal.jsonl"
    partial = run_study(lambda p: -(p["x"] - 7) ** 2,
                        SearchSpace("one", (FloatDim("x", 0.0, 10.0),)),
                        n_trials=8, seed=4, journal_path=journal)
    resumed = run_study(lambda p: -(p["x"] - 7) ** 2,
                        SearchSpace("one", (FloatDim("x", 0.0, 10.0),)),
                        n_trials=20, seed=4, journal_path=journal)
    print(f"\nresumed study: {len(load_journal(journal))} journaled trials, "
          f"best x={resumed.best.params['x']:.3f}")
    board = Path(tmp) / "leaderboard.csv"
    write_leaderboard_csv(board, resumed)
    print("leaderboard head:")
    print("\n".join(board.read_text().splitlines()[:4]))
