"""Command-line entry points orchestrating the coding pipeline.

Subcommands: ``preprocess``, ``split``, ``vectorize``, ``train``,
``evaluate``, ``tune``, ``report``, ``synth``. Exit codes: 0 success,
2 config error, 3 data error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from . import splitter as splitter_mod
from .classifiers import load_model, threshold_scores
from .pipeline import ConfigError, PipelineConfig, _Representation, run_pipeline, tune_pipeline
from .preprocess import preprocess_corpus, tokenize, write_empty_text_report
from .vectorize import write_emb1, write_ids

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _load_config(args) -> PipelineConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = PipelineConfig.from_json_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threshold is not None:
        cfg.threshold = args.threshold
    if args.out is not None:
        cfg.out_dir = args.out
    if getattr(args, "macro_present_only", False):
        cfg.macro_present_only = True
    return cfg


def _vocabulary_for(cfg: PipelineConfig):
    if cfg.vocabulary == "bundled":
        return corpus_mod.load_bundled_vocabulary(cfg.vocabulary_dedupe_first)
    return corpus_mod.load_label_vocabulary(cfg.vocabulary,
                                            dedupe_first=cfg.vocabulary_dedupe_first)


def cmd_synth(args) -> int:
    spec = corpus_mod.SyntheticSpec(
        n_documents=args.n_docs,
        n_labels=args.n_labels,
        zipf_exponent=args.zipf,
        keywords_per_label=args.keywords,
        paraphrase_noise=args.noise,
        multi_label_rate=args.multi_label_rate,
        seed=args.seed if args.seed is not None else 0,
    )
    dataset, oracle = corpus_mod.generate_synthetic_corpus(spec)
    out = Path(args.out or "synthetic")
    out.mkdir(parents=True, exist_ok=True)
    corpus_mod.save_dataset(out / "dataset.jsonl", dataset)
    with open(out / "vocabulary.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["code", "description"])
        w.writerows(dataset.vocabulary.entries)
    write_emb1(out / "oracle.emb1", oracle)
    write_ids(out / "oracle.ids", dataset.ids)
    profile = corpus_mod.frequency_profile(dataset)
    profile.to_csv(out / "frequency.csv")
    print(f"wrote {len(dataset)} documents, {len(dataset.vocabulary)} labels -> {out}")
    print(f"top label covers {profile.coverage_curve()[0]:.1%} of positives; "
          f"{profile.smallest_k_covering(0.8)} labels cover 80%")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    vocabulary = _vocabulary_for(cfg)
    dataset, rejections = corpus_mod.load_dataset(cfg.dataset, vocabulary, cfg.unknown_codes)
    dataset, empty_report = preprocess_corpus(dataset, cfg.preprocess)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_mod.save_dataset(out / "preprocessed.jsonl", dataset)
    write_empty_text_report(out / "empty_text_report.csv", empty_report)
    print(f"preprocessed {len(dataset)} documents "
          f"({len(empty_report)} empty after normalization, "
          f"{len(rejections)} rejected codes) -> {out / 'preprocessed.jsonl'}")
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    vocabulary = _vocabulary_for(cfg)
    dataset, _ = corpus_mod.load_dataset(cfg.dataset, vocabulary, cfg.unknown_codes)
    labeled = dataset.labeled_subset()
    seed = cfg.split_seed if cfg.split_seed is not None else cfg.seed
    assignment = splitter_mod.split_dataset(labeled, cfg.split_ratios, seed)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    assignment.save(out / "split.csv")
    for warning in assignment.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    sizes = {p: len(assignment.ids_for(p)) for p in splitter_mod.PARTITIONS}
    print(f"split {len(labeled)} labeled documents: {sizes} -> {out / 'split.csv'}")
    return EXIT_OK


def cmd_vectorize(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    vocabulary = _vocabulary_for(cfg)
    dataset, _ = corpus_mod.load_dataset(cfg.dataset, vocabulary, cfg.unknown_codes)
    dataset, _ = preprocess_corpus(dataset, cfg.preprocess)
    labeled = dataset.labeled_subset()
    seed = cfg.split_seed if cfg.split_seed is not None else cfg.seed
    if cfg.split_path:
        tags = splitter_mod.load_split(cfg.split_path)
        assignment = splitter_mod.SplitAssignment(
            partitions={d.id: tags[d.id] for d in labeled.documents},
            ratios=cfg.split_ratios, seed=seed)
    else:
        assignment = splitter_mod.split_dataset(labeled, cfg.split_ratios, seed)

    tokens = [tokenize(t) for t in labeled.texts]
    rows = {p: np.array([i for i, d in enumerate(labeled.documents)
                         if assignment.partitions[d.id] == p], dtype=np.int64)
            for p in splitter_mod.PARTITIONS}
    rep = _Representation(cfg, labeled)
    rep.fit([tokens[i] for i in rows["train"]])
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep.save(out)
    for part, idx in rows.items():
        X = rep.transform([tokens[i] for i in idx], idx, is_train=(part == "train"))
        if sp.issparse(X):
            sp.save_npz(out / f"features_{part}.npz", X.tocsr())
        else:
            write_emb1(out / f"features_{part}.emb1", np.asarray(X, dtype=np.float32))
            write_ids(out / f"features_{part}.ids", [labeled.documents[i].id for i in idx])
    print(f"fitted {cfg.representation} on train; wrote features -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    report = run_pipeline(cfg)
    print(_report_line(report))
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _load_config(args)
    study, report = tune_pipeline(cfg)
    complete = [t for t in study.trials if t.status == "complete"]
    print(f"study complete: {len(complete)}/{len(study.trials)} trials, "
          f"best validation F1_micro {study.best.objective:.6f} (trial {study.best.trial_id})")
    print(_report_line(report))
    return EXIT_OK


def _read_predictions_csv(path: str, vocabulary, threshold: float) -> dict[str, set]:
    """Predictions CSV ``id,code,score``; rows scoring below threshold are
    dropped, others become positive predictions."""
    pred: dict[str, set] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["id", "code", "score"]:
            raise corpus_mod.DataError(f"{path}: expected header 'id,code,score'")
        for row in reader:
            if not row:
                continue
            doc_id, code, score = row[0], row[1], float(row[2])
            if code not in vocabulary:
                raise corpus_mod.DataError(f"{path}: unknown code {code}")
            if score >= threshold:
                pred.setdefault(doc_id, set()).add(code)
    return pred


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    vocabulary = _vocabulary_for(cfg)
    dataset, _ = corpus_mod.load_dataset(cfg.dataset, vocabulary, cfg.unknown_codes)
    dataset, _ = preprocess_corpus(dataset, cfg.preprocess)
    labeled = dataset.labeled_subset()
    if not cfg.split_path:
        raise ConfigError("evaluate requires split.path in the config")
    tags = splitter_mod.load_split(cfg.split_path)
    part_ids = [d.id for d in labeled.documents
                if tags.get(d.id) == args.partition]
    if not part_ids:
        raise corpus_mod.DataError(f"no documents in partition {args.partition!r}")
    id_to_row = {d.id: i for i, d in enumerate(labeled.documents)}
    rows = np.array([id_to_row[i] for i in part_ids], dtype=np.int64)
    Y = labeled.label_matrix()[rows]

    if args.predictions:
        pred_sets = _read_predictions_csv(args.predictions, vocabulary, cfg.threshold)
        pred = np.zeros_like(Y)
        for r, doc_id in enumerate(part_ids):
            for code in pred_sets.get(doc_id, ()):
                pred[r, vocabulary.position(code)] = 1
    elif args.model:
        model = load_model(args.model)
        tokens = [tokenize(labeled.documents[i].text) for i in rows]
        rep = _Representation(cfg, labeled)
        train_rows = np.array([id_to_row[d.id] for d in labeled.documents
                               if tags.get(d.id) == "train"], dtype=np.int64)
        rep.fit([tokenize(labeled.documents[i].text) for i in train_rows])
        X = rep.transform(tokens, rows)
        pred = threshold_scores(model.predict_scores(X), cfg.threshold)
    else:
        raise ConfigError("evaluate needs --predictions or --model")

    report = metrics_mod.evaluate(Y, pred,
                                  macro_present_only=cfg.macro_present_only)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_mod.write_summary_json(out / f"evaluate_{args.partition}.json",
                                   {args.partition: report})
    counts = metrics_mod.confusion_counts(Y, pred)
    metrics_mod.write_per_class_csv(out / f"per_class_{args.partition}.csv",
                                    metrics_mod.per_class_report(counts, vocabulary.codes))
    print(json.dumps(report.summary(), indent=2))
    return EXIT_OK


def _report_line(report) -> str:
    v, t = report.validation, report.test
    cfg = report.config
    return (f"{cfg['representation']['name']} + {cfg['classifier']['name']}: "
            f"validation F1_micro {v.f1_micro:.6f} | test F1_micro {t.f1_micro:.6f} "
            f"F1_macro {t.f1_macro:.6f} P_micro {t.precision_micro:.6f} "
            f"R_micro {t.recall_micro:.6f}")


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir or (args.out or "."))
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise corpus_mod.DataError(f"missing report file: {report_path}")
    with open(report_path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    for name in ("summary", "per_class_test", "frequency"):
        path = payload.get("paths", {}).get(name)
        if path and not Path(path).exists():
            raise corpus_mod.DataError(f"missing artifact: {path}")
    t = payload["test"]
    v = payload["validation"]
    cfg = payload["config"]
    line = (f"{cfg['representation']['name']:>12} | {cfg['classifier']['name']:>13} | "
            f"val F1_micro {v['f1_micro']:.6f} | test F1_micro {t['f1_micro']:.6f} | "
            f"F1_macro {t['f1_macro']:.6f} | P_micro {t['precision_micro']:.6f} | "
            f"R_micro {t['recall_micro']:.6f}")
    print(line)
    with open(run_dir / "report_table.txt", "w", encoding="utf-8") as f:
        f.write(line + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, default=None, help="override global seed")
    common.add_argument("--threshold", type=float, default=None,
                        help="decision threshold (default 0.5)")
    common.add_argument("--out", default=None, help="output directory override")
    common.add_argument("--macro-present-only", action="store_true",
                        help="macro-average only over labels present in the partition")
    common.add_argument("--workers", type=int, default=1,
                        help="worker count; values > 1 break bit-reproducibility "
                             "of tuning suggestion order")

    parser = argparse.ArgumentParser(
        prog="icd-coder",
        description="Map free-text clinical descriptions to multi-label ICD code sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("preprocess", "normalize dataset text"),
        ("split", "stratified train/validation/test split"),
        ("vectorize", "fit the representation and write features"),
        ("train", "run the full train/validate/test pipeline"),
        ("tune", "TPE search over the configured preset"),
    ):
        sub.add_parser(name, help=help_text, parents=[common])

    p_eval = sub.add_parser("evaluate", help="score predictions for a partition",
                            parents=[common])
    p_eval.add_argument("--partition", default="test",
                        choices=list(splitter_mod.PARTITIONS))
    p_eval.add_argument("--predictions", help="predictions CSV id,code,score")
    p_eval.add_argument("--model", help="model artifact to run instead of predictions")

    p_rep = sub.add_parser("report", help="re-emit summary files for a finished run",
                           parents=[common])
    p_rep.add_argument("--run-dir", help="run directory (defaults to --out)")

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus", parents=[common])
    p_synth.add_argument("--n-docs", type=int, default=10000)
    p_synth.add_argument("--n-labels", type=int, default=85)
    p_synth.add_argument("--zipf", type=float, default=1.1)
    p_synth.add_argument("--keywords", type=int, default=3)
    p_synth.add_argument("--noise", type=float, default=0.2)
    p_synth.add_argument("--multi-label-rate", type=float, default=0.3)
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "split": cmd_split,
    "vectorize": cmd_vectorize,
    "train": cmd_train,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (corpus_mod.DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # runtime failures keep partial artifacts on disk
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
