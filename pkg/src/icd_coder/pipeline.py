"""End-to-end pipeline: preprocess -> split -> fit representation on train ->
transform all partitions -> fit classifier on train -> select on validation ->
evaluate on test.

Every fitting-time statistic (token vocabulary, idf, SVD basis, topic model,
paragraph vectors) derives from the train partition exclusively; test metrics
are computed exactly once, after all tuning concluded.

The pipeline is driven by a single JSON config document::

    {
      "dataset": "corpus.jsonl",
      "vocabulary": "codes.csv" | "bundled",
      "vocabulary_dedupe_first": true,
      "unknown_codes": "fail" | "reject" | "drop",
      "preprocess": {"expand_codes": true, "lowercase": true,
                      "strip_accents": true, "collapse_whitespace": true},
      "split": {"ratios": [0.7, 0.15, 0.15], "seed": 7, "path": null},
      "representation": {"name": "bow|tfidf|lsa|lda|doc2vec|embeddings",
                          "params": {...}, "matrix": "x.emb1", "ids": "x.ids"},
      "classifier": {"name": "random_forest|xgboost|mlp", "params": {...}},
      "tuner": {"preset": "...", "budget": 20, "seed": 1},
      "threshold": 0.5,
      "seed": 7,
      "out_dir": "runs/exp"
    }

The environment variable ``ICD_CODER_SEED`` overrides the global seed.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from . import splitter as splitter_mod
from . import tuner as tuner_mod
from .classifiers import (
    BoostParams,
    ForestParams,
    MlpParams,
    fit_gradient_boosting,
    fit_mlp,
    fit_random_forest,
    threshold_scores,
)
from .preprocess import PreprocessConfig, preprocess_corpus, tokenize, write_empty_text_report
from .vectorize import fit_bow, fit_lda, fit_lsa, fit_tfidf, load_embeddings, train_doc2vec

REPRESENTATIONS = ("bow", "tfidf", "lsa", "lda", "doc2vec", "embeddings")
CLASSIFIERS = ("random_forest", "xgboost", "mlp")


class ConfigError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


@dataclass
class PipelineConfig:
    dataset: str
    vocabulary: str = "bundled"
    vocabulary_dedupe_first: bool = True
    unknown_codes: str = "fail"
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    split_ratios: tuple[float, float, float] = splitter_mod.DEFAULT_RATIOS
    split_seed: int | None = None
    split_path: str | None = None
    representation: str = "tfidf"
    representation_params: dict = field(default_factory=dict)
    embeddings_matrix: str | None = None
    embeddings_ids: str | None = None
    classifier: str = "mlp"
    classifier_params: dict = field(default_factory=dict)
    tuner_preset: str | None = None
    tuner_budget: int = 0
    tuner_seed: int | None = None
    threshold: float = 0.5
    macro_present_only: bool = False
    seed: int = 0
    out_dir: str = "run_output"

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        try:
            split = d.get("split", {})
            rep = d.get("representation", {})
            clf = d.get("classifier", {})
            tun = d.get("tuner", {})
            cfg = cls(
                dataset=d["dataset"],
                vocabulary=d.get("vocabulary", "bundled"),
                vocabulary_dedupe_first=d.get("vocabulary_dedupe_first", True),
                unknown_codes=d.get("unknown_codes", "fail"),
                preprocess=PreprocessConfig.from_dict(d.get("preprocess", {})),
                split_ratios=tuple(split.get("ratios", splitter_mod.DEFAULT_RATIOS)),
                split_seed=split.get("seed"),
                split_path=split.get("path"),
                representation=rep.get("name", "tfidf"),
                representation_params=dict(rep.get("params", {})),
                embeddings_matrix=rep.get("matrix"),
                embeddings_ids=rep.get("ids"),
                classifier=clf.get("name", "mlp"),
                classifier_params=dict(clf.get("params", {})),
                tuner_preset=tun.get("preset"),
                tuner_budget=int(tun.get("budget", 0)),
                tuner_seed=tun.get("seed"),
                threshold=float(d.get("threshold", 0.5)),
                macro_present_only=bool(d.get("macro_present_only", False)),
                seed=int(d.get("seed", 0)),
                out_dir=d.get("out_dir", "run_output"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        return cfg

    @classmethod
    def from_json_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                d = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = cls.from_dict(d)
        env_seed = os.environ.get("ICD_CODER_SEED")
        if env_seed is not None:
            cfg.seed = int(env_seed)
        return cfg

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "vocabulary": self.vocabulary,
            "vocabulary_dedupe_first": self.vocabulary_dedupe_first,
            "unknown_codes": self.unknown_codes,
            "preprocess": self.preprocess.to_dict(),
            "split": {"ratios": list(self.split_ratios), "seed": self.split_seed,
                      "path": self.split_path},
            "representation": {"name": self.representation,
                               "params": self.representation_params,
                               "matrix": self.embeddings_matrix,
                               "ids": self.embeddings_ids},
            "classifier": {"name": self.classifier, "params": self.classifier_params},
            "tuner": {"preset": self.tuner_preset, "budget": self.tuner_budget,
                      "seed": self.tuner_seed},
            "threshold": self.threshold,
            "macro_present_only": self.macro_present_only,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    def validate(self) -> None:
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(
                f"unknown representation {self.representation!r}; valid: {REPRESENTATIONS}"
            )
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"unknown classifier {self.classifier!r}; valid: {CLASSIFIERS}")
        if not Path(self.dataset).exists():
            raise ConfigError(f"dataset not found: {self.dataset}")
        if self.vocabulary != "bundled" and not Path(self.vocabulary).exists():
            raise ConfigError(f"vocabulary not found: {self.vocabulary}")
        if self.representation == "embeddings":
            if not self.embeddings_matrix or not self.embeddings_ids:
                raise ConfigError("embeddings representation needs matrix and ids paths")
            for p in (self.embeddings_matrix, self.embeddings_ids):
                if not Path(p).exists():
                    raise ConfigError(f"embeddings file not found: {p}")
        if self.split_path is not None and not Path(self.split_path).exists():
            raise ConfigError(f"split file not found: {self.split_path}")
        if self.unknown_codes not in corpus_mod.UNKNOWN_CODE_POLICIES:
            raise ConfigError(f"unknown_codes must be one of {corpus_mod.UNKNOWN_CODE_POLICIES}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must be in [0, 1]")
        if self.tuner_preset is not None and self.tuner_budget < 1:
            raise ConfigError("tuner budget must be >= 1")


@dataclass
class RunReport:
    config: dict
    validation: metrics_mod.MetricsReport
    test: metrics_mod.MetricsReport
    timings: dict
    paths: dict

    def summary(self) -> dict:
        return {
            "config": self.config,
            "validation": self.validation.summary(),
            "test": self.test.summary(),
            "timings": self.timings,
            "paths": self.paths,
        }


def _hidden_layers_from_params(params: dict) -> tuple[int, ...]:
    if "hidden_layers" in params:
        return tuple(params["hidden_layers"])
    n_layers = int(params.get("n_layers", 0))
    return tuple(int(params[f"n_units_l{i}"]) for i in range(n_layers))


def make_classifier_params(name: str, params: dict, seed: int):
    """Translate a parameter dict (tuner sample or config section) into the
    family's params object."""
    params = dict(params)
    seed = int(params.pop("seed", seed))
    if name == "random_forest":
        mode = params.pop("max_features", params.pop("max_features_mode", "sqrt"))
        mode = "all" if mode in (None, "none", "None", "all") else mode
        weight = params.pop("class_weight", "none")
        weight = "none" if weight in (None, "None", "none") else weight
        return ForestParams(
            n_estimators=int(params.pop("n_estimators", 25)),
            max_depth=int(params.pop("max_depth", 15)),
            min_samples_split=int(params.pop("min_samples_split", 2)),
            min_samples_leaf=int(params.pop("min_samples_leaf", 1)),
            max_features_mode=mode,
            bootstrap=bool(params.pop("bootstrap", True)),
            class_weight=weight,
            seed=seed,
        )
    if name == "xgboost":
        return BoostParams(
            n_estimators=int(params.pop("n_estimators", 100)),
            learning_rate=float(params.pop("learning_rate", 0.3)),
            max_depth=int(params.pop("max_depth", 6)),
            subsample=float(params.pop("subsample", 1.0)),
            colsample_bytree=float(params.pop("colsample_bytree", 1.0)),
            gamma=float(params.pop("gamma", 0.0)),
            min_child_weight=float(params.pop("min_child_weight", 1.0)),
            reg_alpha=float(params.pop("reg_alpha", 0.0)),
            reg_lambda=float(params.pop("reg_lambda", 1.0)),
            seed=seed,
        )
    if name == "mlp":
        hidden = _hidden_layers_from_params(params)
        for k in ("n_layers", "n_units_l0", "n_units_l1", "n_units_l2", "hidden_layers"):
            params.pop(k, None)
        return MlpParams(
            hidden_layers=hidden,
            dropout=float(params.pop("dropout", 0.0)),
            learning_rate=float(params.pop("learning_rate", 1e-3)),
            batch_size=int(params.pop("batch_size", 32)),
            epochs=int(params.pop("epochs", 20)),
            optimizer=str(params.pop("optimizer", "adamw")).lower(),
            seed=seed,
        )
    raise ConfigError(f"unknown classifier {name!r}")


def _fit_classifier(name: str, X_train, Y_train, params: dict, seed: int):
    p = make_classifier_params(name, params, seed)
    if name == "random_forest":
        return fit_random_forest(X_train, Y_train, p)
    if name == "xgboost":
        return fit_gradient_boosting(X_train, Y_train, p)
    return fit_mlp(X_train, Y_train, p)


class _Representation:
    """Fits on train tokens only; transforms any partition."""

    def __init__(self, config: PipelineConfig, dataset):
        self.config = config
        self.dataset = dataset
        self.name = config.representation
        self.params = dict(config.representation_params)
        self.seed = int(self.params.pop("seed", config.seed))
        self.vectorizer = None
        self.projector = None

    def _vocab_args(self) -> dict:
        return {
            "max_features": self.params.get("max_features"),
            "min_df": int(self.params.get("min_df", 1)),
            "max_df": float(self.params.get("max_df", 1.0)),
        }

    def fit(self, tokens_train: list[list[str]]) -> None:
        name = self.name
        if name == "bow":
            self.vectorizer = fit_bow(tokens_train, **self._vocab_args())
        elif name == "tfidf":
            self.vectorizer = fit_tfidf(tokens_train, **self._vocab_args())
        elif name == "lsa":
            self.vectorizer = fit_tfidf(tokens_train, **self._vocab_args())
            base = self.vectorizer.transform(tokens_train)
            k = int(self.params.get("n_components", 100))
            self.projector = fit_lsa(base, k, seed=self.seed)
        elif name == "lda":
            self.vectorizer = fit_bow(tokens_train, **self._vocab_args())
            counts = self.vectorizer.transform(tokens_train)
            self.projector = fit_lda(
                counts,
                n_topics=int(self.params.get("n_topics", 20)),
                max_iter=int(self.params.get("max_iter", 30)),
                seed=self.seed,
            )
        elif name == "doc2vec":
            self.vectorizer = train_doc2vec(
                tokens_train,
                vector_size=int(self.params.get("vector_size", 100)),
                min_count=int(self.params.get("min_count", 1)),
                epochs=int(self.params.get("epochs", 40)),
                seed=self.seed,
            )
            self._train_tokens = tokens_train
        elif name == "embeddings":
            matrix = load_embeddings(
                self.config.embeddings_matrix, self.config.embeddings_ids, self.dataset
            )
            self._embedding_rows = matrix.astype(np.float64)
        else:
            raise ConfigError(f"unknown representation {name!r}")

    def transform(self, tokens: list[list[str]], dataset_rows: np.ndarray,
                  is_train: bool = False):
        name = self.name
        if name in ("bow", "tfidf"):
            return self.vectorizer.transform(tokens)
        if name in ("lsa", "lda"):
            base = self.vectorizer.transform(tokens)
            return (self.projector.project(base) if name == "lsa"
                    else self.projector.infer(base))
        if name == "doc2vec":
            if is_train:
                return self.vectorizer.doc_vectors.copy()
            return np.vstack([self.vectorizer.infer_vector(t) for t in tokens]) \
                if tokens else np.zeros((0, self.vectorizer.vector_size))
        if name == "embeddings":
            return self._embedding_rows[dataset_rows]
        raise AssertionError(name)

    def save(self, out_dir: Path) -> str | None:
        if self.name in ("bow", "tfidf") and self.vectorizer is not None:
            path = out_dir / "vectorizer.json"
            self.vectorizer.save(path)
            return str(path)
        if self.name == "lsa" and self.vectorizer is not None:
            path = out_dir / "vectorizer.json"
            self.vectorizer.save(path)
            return str(path)
        return None


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Execute the full train/validate/test cycle and write run artifacts."""
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    paths: dict[str, str] = {}

    def staged(stage):
        def wrap(fn, *args, **kwargs):
            start = time.perf_counter()
            try:
                result = fn(*args, **kwargs)
            except (corpus_mod.DataError, ConfigError):
                raise  # keep the type so callers map it to the right exit code
            except Exception as exc:
                raise RuntimeError(f"stage {stage!r} failed: {exc}") from exc
            timings[stage] = time.perf_counter() - start
            return result
        return wrap

    # Load
    vocabulary = (corpus_mod.load_bundled_vocabulary(config.vocabulary_dedupe_first)
                  if config.vocabulary == "bundled"
                  else corpus_mod.load_label_vocabulary(
                      config.vocabulary, dedupe_first=config.vocabulary_dedupe_first))
    dataset, rejections = staged("load")(
        corpus_mod.load_dataset, config.dataset, vocabulary, config.unknown_codes
    )
    if rejections:
        rej_path = out_dir / "rejected_codes.csv"
        with open(rej_path, "w", encoding="utf-8") as f:
            f.write("line,code\n")
            f.writelines(f"{line},{code}\n" for line, code in rejections)
        paths["rejections"] = str(rej_path)

    # Preprocess
    dataset, empty_report = staged("preprocess")(preprocess_corpus, dataset, config.preprocess)
    if empty_report:
        write_empty_text_report(out_dir / "empty_text_report.csv", empty_report)
        paths["empty_text_report"] = str(out_dir / "empty_text_report.csv")

    # Supervised subset + frequency profile
    labeled = dataset.labeled_subset()
    if len(labeled) == 0:
        raise RuntimeError("stage 'split' failed: no labeled documents")
    profile = corpus_mod.frequency_profile(labeled)
    profile.to_csv(out_dir / "frequency.csv")
    paths["frequency"] = str(out_dir / "frequency.csv")

    # Split
    split_seed = config.split_seed if config.split_seed is not None else config.seed
    if config.split_path is not None:
        tags_by_id = splitter_mod.load_split(config.split_path)
        missing = [d.id for d in labeled.documents if d.id not in tags_by_id]
        if missing:
            raise RuntimeError(
                f"stage 'split' failed: split file lacks ids: {', '.join(missing[:5])}"
            )
        assignment = splitter_mod.SplitAssignment(
            partitions={d.id: tags_by_id[d.id] for d in labeled.documents},
            ratios=config.split_ratios, seed=split_seed)
    else:
        assignment = staged("split")(
            splitter_mod.split_dataset, labeled, config.split_ratios, split_seed
        )
    split_csv = out_dir / "split.csv"
    assignment.save(split_csv)
    paths["split"] = str(split_csv)

    report = _train_validate_test(config, labeled, assignment, out_dir, timings, paths)
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(report.summary(), f, indent=2)
    paths["report"] = str(out_dir / "report.json")
    return report


def _partition_rows(labeled, assignment) -> dict[str, np.ndarray]:
    rows = {name: [] for name in splitter_mod.PARTITIONS}
    for i, doc in enumerate(labeled.documents):
        rows[assignment.partitions[doc.id]].append(i)
    return {k: np.array(v, dtype=np.int64) for k, v in rows.items()}


def _train_validate_test(config, labeled, assignment, out_dir, timings, paths) -> RunReport:
    rows = _partition_rows(labeled, assignment)
    Y = labeled.label_matrix()
    tokens = [tokenize(t) for t in labeled.texts]

    rep = _Representation(config, labeled)
    start = time.perf_counter()
    try:
        rep.fit([tokens[i] for i in rows["train"]])
        X = {
            part: rep.transform([tokens[i] for i in idx], idx, is_train=(part == "train"))
            for part, idx in rows.items()
        }
    except Exception as exc:
        raise RuntimeError(f"stage 'vectorize' failed: {exc}") from exc
    timings["vectorize"] = time.perf_counter() - start
    vec_path = rep.save(out_dir)
    if vec_path:
        paths["vectorizer"] = vec_path

    start = time.perf_counter()
    try:
        model = _fit_classifier(config.classifier, X["train"], Y[rows["train"]],
                                config.classifier_params, config.seed)
    except Exception as exc:
        raise RuntimeError(f"stage 'train' failed: {exc}") from exc
    timings["train"] = time.perf_counter() - start
    model_path = out_dir / "model.icdm"
    model.save(model_path)
    paths["model"] = str(model_path)

    reports = {}
    start = time.perf_counter()
    try:
        for part in ("validation", "test"):
            idx = rows[part]
            pred = threshold_scores(model.predict_scores(X[part]), config.threshold)
            reports[part] = metrics_mod.evaluate(
                Y[idx], pred, macro_present_only=config.macro_present_only)
            counts = metrics_mod.confusion_counts(Y[idx], pred)
            rows_csv = metrics_mod.per_class_report(counts, labeled.vocabulary.codes)
            csv_path = out_dir / f"per_class_{part}.csv"
            metrics_mod.write_per_class_csv(csv_path, rows_csv)
            paths[f"per_class_{part}"] = str(csv_path)
    except Exception as exc:
        raise RuntimeError(f"stage 'evaluate' failed: {exc}") from exc
    timings["evaluate"] = time.perf_counter() - start

    metrics_mod.write_summary_json(out_dir / "summary.json", reports)
    paths["summary"] = str(out_dir / "summary.json")
    return RunReport(config=config.to_dict(), validation=reports["validation"],
                     test=reports["test"], timings=timings, paths=paths)


def _objective_for(config: PipelineConfig, labeled, assignment):
    """Validation-F1 objective over (representation|classifier) params. The
    test partition is never touched here."""
    rows = _partition_rows(labeled, assignment)
    Y = labeled.label_matrix()
    tokens = [tokenize(t) for t in labeled.texts]
    preset_name = config.tuner_preset
    rep_presets = ("bow", "tfidf", "lsa", "lda", "doc2vec")

    def objective(params: dict) -> float:
        cfg = PipelineConfig.from_dict(config.to_dict())
        if preset_name in rep_presets:
            cfg.representation = preset_name
            cfg.representation_params = {**config.representation_params, **params}
        else:
            cfg.classifier = preset_name
            cfg.classifier_params = {**config.classifier_params, **params}
        rep = _Representation(cfg, labeled)
        rep.fit([tokens[i] for i in rows["train"]])
        X_train = rep.transform([tokens[i] for i in rows["train"]], rows["train"], True)
        X_val = rep.transform([tokens[i] for i in rows["validation"]], rows["validation"])
        model = _fit_classifier(cfg.classifier, X_train, Y[rows["train"]],
                                cfg.classifier_params, cfg.seed)
        pred = threshold_scores(model.predict_scores(X_val), cfg.threshold)
        return metrics_mod.evaluate(Y[rows["validation"]], pred).f1_micro

    return objective


def tune_pipeline(config: PipelineConfig) -> tuple[tuner_mod.StudyResult, RunReport]:
    """TPE search over the configured preset maximizing validation micro-F1,
    then one final full run (including the single test evaluation) with the
    best parameters."""
    config.validate()
    if config.tuner_preset is None:
        raise ConfigError("tuner preset missing")
    if config.tuner_preset == "finetune":
        raise ConfigError("the finetune preset is executed by the embedding exporter")
    space = tuner_mod.preset(config.tuner_preset)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocabulary = (corpus_mod.load_bundled_vocabulary(config.vocabulary_dedupe_first)
                  if config.vocabulary == "bundled"
                  else corpus_mod.load_label_vocabulary(
                      config.vocabulary, dedupe_first=config.vocabulary_dedupe_first))
    dataset, _ = corpus_mod.load_dataset(config.dataset, vocabulary, config.unknown_codes)
    dataset, _ = preprocess_corpus(dataset, config.preprocess)
    labeled = dataset.labeled_subset()
    split_seed = config.split_seed if config.split_seed is not None else config.seed
    if config.split_path is not None:
        tags_by_id = splitter_mod.load_split(config.split_path)
        assignment = splitter_mod.SplitAssignment(
            partitions={d.id: tags_by_id[d.id] for d in labeled.documents},
            ratios=config.split_ratios, seed=split_seed)
    else:
        assignment = splitter_mod.split_dataset(labeled, config.split_ratios, split_seed)

    tuner_seed = config.tuner_seed if config.tuner_seed is not None else config.seed
    study = tuner_mod.run_study(
        _objective_for(config, labeled, assignment),
        space,
        n_trials=config.tuner_budget,
        seed=tuner_seed,
        journal_path=out_dir / "study_journal.jsonl",
    )
    tuner_mod.write_leaderboard_csv(out_dir / "leaderboard.csv", study)

    best_cfg = PipelineConfig.from_dict(config.to_dict())
    if config.tuner_preset in ("bow", "tfidf", "lsa", "lda", "doc2vec"):
        best_cfg.representation = config.tuner_preset
        best_cfg.representation_params = {**config.representation_params, **study.best.params}
    else:
        best_cfg.classifier = config.tuner_preset
        best_cfg.classifier_params = {**config.classifier_params, **study.best.params}
    best_cfg.split_path = str(Path(config.out_dir) / "tune_split.csv")
    assignment.save(best_cfg.split_path)
    report = run_pipeline(best_cfg)
    return study, report
