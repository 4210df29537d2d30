"""Frozen-embedding export: documents through a pretrained encoder, pooled
final hidden states written as an EMB1 matrix plus ids sidecar.

Mean pooling over non-padding tokens is the default; ``first-token`` takes
the leading position's hidden state. The pooling choice, model identifier and
dimensions are recorded in a JSON sidecar next to the matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .data import read_dataset
from .emb1 import write_emb1, write_ids

POOLINGS = ("mean", "first-token")


@dataclass(frozen=True)
class ExportJob:
    model: str
    dataset: str
    matrix_out: str
    ids_out: str
    pooling: str = "mean"
    max_seq_len: int = 128
    batch_size: int = 32
    seed: int = 0

    def validate(self) -> None:
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}")
        if self.max_seq_len < 2:
            raise ValueError("max_seq_len must be >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class ExportReport:
    n_documents: int
    dim: int
    truncated: int


def pool_hidden_states(hidden: torch.Tensor, attention_mask: torch.Tensor,
                       pooling: str) -> torch.Tensor:
    if pooling == "first-token":
        return hidden[:, 0]
    mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1.0)
    return summed / counts


def encode_documents(model, tokenizer, texts: list[str], pooling: str,
                     max_seq_len: int, batch_size: int) -> tuple[np.ndarray, int]:
    """Returns (pooled matrix float32, number of truncated documents)."""
    model.eval()
    rows: list[np.ndarray] = []
    truncated = 0
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            batch = texts[start:start + batch_size]
            full = tokenizer(batch, truncation=False)["input_ids"]
            truncated += sum(1 for ids in full if len(ids) > max_seq_len)
            enc = tokenizer(batch, truncation=True, max_length=max_seq_len,
                            padding=True, return_tensors="pt")
            out = model(**enc)
            pooled = pool_hidden_states(out.last_hidden_state,
                                        enc["attention_mask"], pooling)
            rows.append(pooled.cpu().numpy().astype(np.float32))
    return np.vstack(rows), truncated


def export_embeddings(job: ExportJob) -> ExportReport:
    job.validate()
    torch.manual_seed(job.seed)
    records = read_dataset(job.dataset)
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModel.from_pretrained(job.model)
    matrix, truncated = encode_documents(
        model, tokenizer, [r.text for r in records],
        job.pooling, job.max_seq_len, job.batch_size)
    write_emb1(job.matrix_out, matrix)
    write_ids(job.ids_out, [r.id for r in records])
    sidecar = Path(str(job.matrix_out) + ".meta.json")
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump({"model": job.model, "pooling": job.pooling,
                   "max_seq_len": job.max_seq_len, "rows": int(matrix.shape[0]),
                   "dim": int(matrix.shape[1]), "truncated": truncated}, f, indent=2)
    return ExportReport(n_documents=matrix.shape[0], dim=matrix.shape[1],
                        truncated=truncated)
