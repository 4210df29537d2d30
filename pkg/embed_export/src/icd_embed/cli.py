"""``icd-embed`` command line: export frozen embeddings or run LP-FT
fine-tuning, both driven by a JSON config.

Export config::

    {"model": "path-or-identifier", "dataset": "corpus.jsonl",
     "matrix_out": "emb.emb1", "ids_out": "emb.ids",
     "pooling": "mean", "max_seq_len": 128, "batch_size": 32, "seed": 0}

Finetune config::

    {"model": "path-or-identifier", "dataset": "corpus.jsonl",
     "vocabulary": "codes.csv", "split": "split.csv", "out_dir": "ft_run",
     "pooling": "mean", "max_seq_len": 128, "threshold": 0.5,
     "params": {"hidden_dim": 256, "dropout": 0.1, "lr": 1.5e-5,
                 "lr_head": 1.75e-4, "batch_size": 8, "epochs": 5,
                 "frozen_epochs": 1, "warmup_percentage": 0.05,
                 "pos_weight_alpha": 0.0, "max_grad_norm": 1.0, "seed": 0}}
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .export import ExportJob, export_embeddings
from .finetune import FinetuneParams, finetune_lpft


def _read_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def cmd_export(args) -> int:
    cfg = _read_config(args.config)
    job = ExportJob(
        model=cfg["model"],
        dataset=cfg["dataset"],
        matrix_out=cfg["matrix_out"],
        ids_out=cfg["ids_out"],
        pooling=cfg.get("pooling", "mean"),
        max_seq_len=int(cfg.get("max_seq_len", 128)),
        batch_size=int(cfg.get("batch_size", 32)),
        seed=int(cfg.get("seed", 0)),
    )
    report = export_embeddings(job)
    print(f"exported {report.n_documents} x {report.dim} embeddings "
          f"({report.truncated} document(s) truncated) -> {job.matrix_out}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _read_config(args.config)
    params = FinetuneParams(**cfg.get("params", {}))
    result = finetune_lpft(
        dataset_path=cfg["dataset"],
        split_path=cfg["split"],
        vocabulary_path=cfg["vocabulary"],
        model_path=cfg["model"],
        params=params,
        out_dir=cfg.get("out_dir", "finetune_run"),
        pooling=cfg.get("pooling", "mean"),
        max_seq_len=int(cfg.get("max_seq_len", 128)),
        threshold=float(cfg.get("threshold", 0.5)),
    )
    print(f"final epoch loss {result.epoch_losses[-1]:.6f}; "
          f"scores -> {result.scores_path}; predictions -> {result.predictions_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="icd-embed",
        description="Transformer embedding export and LP-FT fine-tuning.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_export = sub.add_parser("export", help="write pooled embeddings as EMB1")
    p_export.add_argument("--config", required=True)
    p_ft = sub.add_parser("finetune", help="linear probing then fine-tuning")
    p_ft.add_argument("--config", required=True)
    args = parser.parse_args(argv)
    try:
        return {"export": cmd_export, "finetune": cmd_finetune}[args.command](args)
    except (KeyError, ValueError, OSError) as exc:
        print(f"config/data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
