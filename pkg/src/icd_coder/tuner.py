"""Sequential model-based hyperparameter search (tree-structured Parzen
estimator) maximizing a scalar objective, plus the named search-space presets
for every representation and classifier family.

TPE constants are pinned for determinism: 10 uniform startup trials, a 0.25
good/bad quantile, 24 candidate draws per dimension, and Gaussian kernels with
per-point bandwidths set to the nearest-neighbor distance floored at 1% of
the dimension's range. Dimensions are modeled independently; log-uniform
dimensions are modeled in log space; integer and stepped dimensions round to
their grid after sampling. The per-trial random stream is derived from
(seed, trial index), so an interrupted study replayed from its journal
resumes with identical suggestions.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

N_STARTUP_TRIALS = 10
GOOD_QUANTILE = 0.25
N_EI_CANDIDATES = 24
BANDWIDTH_FLOOR = 0.01


class StudyError(RuntimeError):
    """The study could not produce any complete trial."""


@dataclass(frozen=True)
class IntDim:
    name: str
    low: int
    high: int
    step: int = 1
    condition: tuple[str, int] | None = None  # active iff params[name] >= value

    def kind(self) -> str:
        return "int"


@dataclass(frozen=True)
class FloatDim:
    name: str
    low: float
    high: float
    step: float | None = None
    log: bool = False
    condition: tuple[str, int] | None = None

    def kind(self) -> str:
        return "float"


@dataclass(frozen=True)
class CatDim:
    name: str
    choices: tuple
    condition: tuple[str, int] | None = None

    def kind(self) -> str:
        return "categorical"


Dimension = IntDim | FloatDim | CatDim


@dataclass(frozen=True)
class SearchSpace:
    name: str
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        if not self.dimensions:
            raise ValueError("search space has no dimensions")
        seen = set()
        for dim in self.dimensions:
            if dim.name in seen:
                raise ValueError(f"duplicate dimension {dim.name}")
            seen.add(dim.name)

    def active(self, dim: Dimension, params: dict) -> bool:
        if dim.condition is None:
            return True
        ref, minimum = dim.condition
        return ref in params and params[ref] >= minimum

    def validate_point(self, params: dict) -> None:
        for dim in self.dimensions:
            if not self.active(dim, params):
                if dim.name in params:
                    raise ValueError(f"{dim.name} present but its condition is not met")
                continue
            if dim.name not in params:
                raise ValueError(f"missing dimension {dim.name}")
            v = params[dim.name]
            if isinstance(dim, CatDim):
                if v not in dim.choices:
                    raise ValueError(f"{dim.name}={v!r} not in {dim.choices}")
                continue
            if not dim.low <= v <= dim.high:
                raise ValueError(f"{dim.name}={v} outside [{dim.low}, {dim.high}]")
            if isinstance(dim, IntDim):
                if (v - dim.low) % dim.step != 0:
                    raise ValueError(f"{dim.name}={v} off the step-{dim.step} grid")
            elif dim.step is not None:
                k = round((v - dim.low) / dim.step)
                if abs(v - (dim.low + k * dim.step)) > 1e-9:
                    raise ValueError(f"{dim.name}={v} off the step-{dim.step} grid")


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    params: dict
    objective: float | None
    status: str  # complete | failed
    wall_time: float = 0.0

    def __post_init__(self):
        if self.status == "complete" and self.objective is None:
            raise ValueError("complete trial requires an objective")
        if self.status == "failed" and self.objective is not None:
            raise ValueError("failed trial cannot carry an objective")

    def to_json(self) -> str:
        return json.dumps(
            {"trial_id": self.trial_id, "params": self.params,
             "objective": self.objective, "status": self.status,
             "wall_time": self.wall_time}
        )

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        d = json.loads(line)
        return cls(trial_id=d["trial_id"], params=d["params"], objective=d["objective"],
                   status=d["status"], wall_time=d.get("wall_time", 0.0))


@dataclass(frozen=True)
class StudyResult:
    trials: tuple[TrialRecord, ...]
    best: TrialRecord
    seed: int
    space_name: str


def _grid_round(value: float, low: float, step: float, high: float) -> float:
    k = round((value - low) / step)
    return float(min(max(low + k * step, low), high))


def _uniform_sample(dim: Dimension, rng: np.random.Generator):
    if isinstance(dim, CatDim):
        return dim.choices[int(rng.integers(len(dim.choices)))]
    if isinstance(dim, IntDim):
        n_grid = (dim.high - dim.low) // dim.step + 1
        return int(dim.low + dim.step * int(rng.integers(n_grid)))
    if dim.log:
        value = float(np.exp(rng.uniform(np.log(dim.low), np.log(dim.high))))
    else:
        value = float(rng.uniform(dim.low, dim.high))
    if dim.step is not None:
        value = _grid_round(value, dim.low, dim.step, dim.high)
    return value


def _parzen_components(points: np.ndarray, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive Parzen mixture: the observed points plus one wide prior
    component at mid-range (full-range sigma). Per-point widths are the larger
    distance to the two adjacent neighbors (the prior center counts as a
    neighbor), floored at 1% of the dimension's range and capped at it."""
    span = hi - lo
    # 1% of range, widened to range/(1+n) while observations are scarce so
    # early kernels stay exploratory (the count-dependent clip of the
    # classic adaptive Parzen estimator).
    floor = max(BANDWIDTH_FLOOR * span, span / (1.0 + points.size))
    prior_mu = 0.5 * (lo + hi)
    centers = np.concatenate([points, [prior_mu]])
    order = np.argsort(centers, kind="stable")
    if centers.size == 1:
        widths = np.array([span])
    else:
        gaps = np.diff(centers[order])
        left = np.concatenate([gaps[:1], gaps])
        right = np.concatenate([gaps, gaps[-1:]])
        widths = np.empty(centers.size)
        widths[order] = np.clip(np.maximum(left, right), floor, span)
    widths[-1] = span  # the prior stays wide regardless of neighbors
    return centers, widths


def _log_mixture_pdf(x: np.ndarray, centers: np.ndarray, bw: np.ndarray) -> np.ndarray:
    z = (x[:, None] - centers[None, :]) / bw[None, :]
    log_components = -0.5 * z * z - np.log(bw[None, :] * np.sqrt(2.0 * np.pi))
    m = log_components.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(log_components - m).sum(axis=1, keepdims=True))).ravel() \
        - np.log(centers.size)


def _split_good_bad(observations: list[tuple[float, object]]) -> tuple[list, list]:
    ordered = sorted(observations, key=lambda t: -t[0])
    n_good = max(1, math.ceil(GOOD_QUANTILE * len(ordered)))
    return [v for _, v in ordered[:n_good]], [v for _, v in ordered[n_good:]]


def _tpe_numeric(dim: IntDim | FloatDim, good: list, bad: list, rng: np.random.Generator):
    log = isinstance(dim, FloatDim) and dim.log
    to_model = (lambda v: math.log(v)) if log else (lambda v: float(v))
    lo, hi = to_model(dim.low), to_model(dim.high)

    g, bw_g = _parzen_components(np.array([to_model(v) for v in good]), lo, hi)
    idx = rng.integers(len(g), size=N_EI_CANDIDATES)
    candidates = np.clip(rng.normal(g[idx], bw_g[idx]), lo, hi)

    score = _log_mixture_pdf(candidates, g, bw_g)
    if bad:
        b, bw_b = _parzen_components(np.array([to_model(v) for v in bad]), lo, hi)
        score = score - _log_mixture_pdf(candidates, b, bw_b)
    x = float(candidates[int(np.argmax(score))])
    value = math.exp(x) if log else x
    if isinstance(dim, IntDim):
        return int(_grid_round(value, dim.low, dim.step, dim.high))
    if dim.step is not None:
        return _grid_round(value, dim.low, dim.step, dim.high)
    return float(min(max(value, dim.low), dim.high))


def _tpe_categorical(dim: CatDim, good: list, bad: list, rng: np.random.Generator):
    k = len(dim.choices)

    def smoothed(values: list) -> np.ndarray:
        counts = np.array([sum(1 for v in values if v == c) for c in dim.choices],
                          dtype=np.float64)
        return (counts + 1.0) / (len(values) + k)

    pg = smoothed(good)
    pb = smoothed(bad)
    draws = rng.choice(k, size=N_EI_CANDIDATES, p=pg)
    ratios = pg[draws] / pb[draws]
    return dim.choices[int(draws[int(np.argmax(ratios))])]


def suggest(history: Sequence[TrialRecord], space: SearchSpace,
            rng: np.random.Generator) -> dict:
    """Propose one parameter set. Uniform during startup; TPE afterwards."""
    complete = [t for t in history if t.status == "complete"]
    params: dict = {}
    for dim in space.dimensions:
        if not space.active(dim, params):
            continue
        observations = [
            (t.objective, t.params[dim.name]) for t in complete if dim.name in t.params
        ]
        if len(history) < N_STARTUP_TRIALS or len(observations) < 2:
            params[dim.name] = _uniform_sample(dim, rng)
            continue
        good, bad = _split_good_bad(observations)
        if isinstance(dim, CatDim):
            params[dim.name] = _tpe_categorical(dim, good, bad, rng)
        else:
            params[dim.name] = _tpe_numeric(dim, good, bad, rng)
    space.validate_point(params)
    return params


def run_study(
    objective: Callable[[dict], float],
    space: SearchSpace,
    n_trials: int,
    seed: int = 0,
    journal_path: str | Path | None = None,
    on_trial: Callable[[TrialRecord], None] | None = None,
) -> StudyResult:
    """Sequential study. Failed evaluations are recorded and excluded from the
    TPE model. With a journal path, existing records are replayed first and
    new trials are appended, so interrupted studies resume deterministically.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    history: list[TrialRecord] = []
    if journal_path is not None and Path(journal_path).exists():
        history = load_journal(journal_path)

    for i in range(len(history), n_trials):
        rng = np.random.default_rng([seed, i])
        params = suggest(history, space, rng)
        start = time.perf_counter()
        try:
            value = float(objective(params))
            record = TrialRecord(trial_id=i, params=params, objective=value,
                                 status="complete",
                                 wall_time=time.perf_counter() - start)
        except Exception:
            record = TrialRecord(trial_id=i, params=params, objective=None,
                                 status="failed",
                                 wall_time=time.perf_counter() - start)
        history.append(record)
        if journal_path is not None:
            with open(journal_path, "a", encoding="utf-8") as f:
                f.write(record.to_json() + "\n")
        if on_trial is not None:
            on_trial(record)

    complete = [t for t in history if t.status == "complete"]
    if not complete:
        raise StudyError("every trial failed")
    best = max(complete, key=lambda t: (t.objective, -t.trial_id))
    return StudyResult(trials=tuple(history), best=best, seed=seed,
                       space_name=space.name)


def load_journal(path: str | Path) -> list[TrialRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(TrialRecord.from_json(line))
    return records


def write_leaderboard_csv(path: str | Path, study: StudyResult, top: int = 5) -> None:
    """CSV of the best configurations, one (configuration, parameter, value)
    row per parameter, ranked by objective."""
    complete = sorted((t for t in study.trials if t.status == "complete"),
                      key=lambda t: (-t.objective, t.trial_id))
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["configuration", "parameter", "value"])
        for rank, trial in enumerate(complete[:top], start=1):
            config = f"{study.space_name}_trial{trial.trial_id}_rank{rank}"
            w.writerow([config, "objective", repr(trial.objective)])
            for key, value in trial.params.items():
                w.writerow([config, key, value])


_VOCAB_DIMS = (
    IntDim("max_features", 1000, 10000, step=500),
    IntDim("min_df", 1, 5),
    FloatDim("max_df", 0.80, 0.99, step=0.01),
)

_PRESETS: dict[str, tuple[Dimension, ...]] = {
    "bow": _VOCAB_DIMS,
    "tfidf": _VOCAB_DIMS,
    "lsa": (IntDim("n_components", 50, 500, step=50), *_VOCAB_DIMS),
    "lda": (
        IntDim("n_topics", 10, 100, step=10),
        IntDim("max_iter", 10, 50, step=10),
        *_VOCAB_DIMS,
    ),
    "doc2vec": (
        IntDim("vector_size", 100, 500, step=50),
        IntDim("min_count", 1, 5),
        IntDim("epochs", 20, 100, step=10),
    ),
    "random_forest": (
        IntDim("n_estimators", 5, 50),
        IntDim("max_depth", 5, 25),
        IntDim("min_samples_split", 2, 6),
        IntDim("min_samples_leaf", 1, 4),
        CatDim("max_features", ("sqrt", "log2", "all")),
        CatDim("bootstrap", (True, False)),
        CatDim("class_weight", ("none", "balanced")),
    ),
    "xgboost": (
        IntDim("n_estimators", 100, 800),
        FloatDim("learning_rate", 1e-3, 0.3, log=True),
        IntDim("max_depth", 3, 12),
        FloatDim("subsample", 0.5, 1.0),
        FloatDim("colsample_bytree", 0.5, 1.0),
        FloatDim("gamma", 0.0, 5.0),
        IntDim("min_child_weight", 1, 10),
        FloatDim("reg_alpha", 0.0, 10.0),
        FloatDim("reg_lambda", 0.0, 10.0),
    ),
    "mlp": (
        IntDim("n_layers", 0, 3),
        IntDim("n_units_l0", 32, 512, step=32, condition=("n_layers", 1)),
        IntDim("n_units_l1", 32, 512, step=32, condition=("n_layers", 2)),
        IntDim("n_units_l2", 32, 512, step=32, condition=("n_layers", 3)),
        FloatDim("dropout", 0.0, 0.5, step=0.1),
        FloatDim("learning_rate", 1e-5, 1e-2, log=True),
        CatDim("batch_size", (32, 64, 128)),
        IntDim("epochs", 10, 40),
        CatDim("optimizer", ("adamw", "rmsprop", "sgd")),
    ),
    "finetune": (
        IntDim("hidden_dim", 256, 1536, step=128),
        FloatDim("dropout", 0.0, 0.2, step=0.05),
        FloatDim("lr", 1e-6, 5e-5, log=True),
        FloatDim("lr_head", 1e-4, 5e-3, log=True),
        CatDim("batch_size", (8, 16)),
        IntDim("epochs", 5, 15),
        IntDim("frozen_epochs", 1, 3),
        FloatDim("warmup_percentage", 0.0, 0.2, step=0.05),
        FloatDim("pos_weight_alpha", 0.0, 1.0, step=0.1),
        FloatDim("max_grad_norm", 0.2, 1.0, step=0.1),
    ),
}


def preset(name: str) -> SearchSpace:
    """The published search space for a representation or classifier family."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; valid: {', '.join(sorted(_PRESETS))}")
    return SearchSpace(name=name, dimensions=_PRESETS[name])


# Shipped reference configurations for full-scale reruns, keyed by the
# backbone embedding they pair with.
BEST_CONFIGURATIONS: dict[str, dict] = {
    "finetune_e5_large": {
        "hidden_dim": 1280,
        "dropout": 0.1,
        "lr": 1.5243337984464924e-05,
        "lr_head": 0.000175389640525079,
        "batch_size": 8,
        "epochs": 15,
        "frozen_epochs": 1,
        "warmup_percentage": 0.05,
        "pos_weight_alpha": 0.0,
        "max_grad_norm": 1.0,
    },
    "mlt_xgboost_e5_large": {
        "n_estimators": 759,
        "learning_rate": 0.06812461682319591,
        "max_depth": 9,
        "subsample": 0.5810888790819708,
        "colsample_bytree": 0.6884800605089568,
        "gamma": 0.6242871360525342,
        "min_child_weight": 10,
        "reg_alpha": 1.2494601393943636,
        "reg_lambda": 6.7767174069276574,
    },
    "mlt_xgboost_bio_lord": {
        "n_estimators": 474,
        "learning_rate": 0.06814228540442097,
        "max_depth": 9,
        "subsample": 0.6899201652382992,
        "colsample_bytree": 0.6088435881640017,
        "gamma": 1.4325774737625496,
        "min_child_weight": 4,
        "reg_alpha": 0.5647227880560319,
        "reg_lambda": 4.147124014825858,
    },
    "mlt_xgboost_e5_base": {
        "n_estimators": 684,
        "learning_rate": 0.08897215138919123,
        "max_depth": 8,
        "subsample": 0.7884814838592877,
        "colsample_bytree": 0.8828431142426094,
        "gamma": 0.24276864122614503,
        "min_child_weight": 10,
        "reg_alpha": 2.756079736396261,
        "reg_lambda": 0.6687189811925814,
    },
    "mlt_xgboost_paraphrase_multilingual": {
        "n_estimators": 484,
        "learning_rate": 0.11167218746749885,
        "max_depth": 7,
        "subsample": 0.7860690412680696,
        "colsample_bytree": 0.9280614811263148,
        "gamma": 0.23647686141974913,
        "min_child_weight": 6,
        "reg_alpha": 1.1853215759117572,
        "reg_lambda": 7.951972267900953,
    },
}
