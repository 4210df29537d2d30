"""Linear probing then fine-tuning of a transformer backbone for multi-label
code assignment.

A classification head (one hidden layer, dropout, one logit per label) sits
on the pooled final hidden state. For ``frozen_epochs`` only the head trains
at ``lr_head`` with the backbone frozen; afterwards backbone and head train
jointly with their separate learning rates. The loss is per-element binary
cross-entropy with per-label positive weights (negatives/positives)**alpha,
learning rates warm up linearly over ``warmup_percentage`` of total steps,
and gradients are clipped to ``max_grad_norm`` (post-clip norms recorded).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from transformers import AutoModel, AutoTokenizer

from .data import label_matrix, read_dataset, read_split, read_vocabulary
from .emb1 import write_emb1, write_ids
from .export import pool_hidden_states

logger = logging.getLogger(__name__)

WEIGHT_DECAY = 0.01


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class FinetuneParams:
    hidden_dim: int = 256
    dropout: float = 0.1
    lr: float = 1.5e-5
    lr_head: float = 1.75e-4
    batch_size: int = 8
    epochs: int = 5
    frozen_epochs: int = 1
    warmup_percentage: float = 0.05
    pos_weight_alpha: float = 0.0
    max_grad_norm: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.epochs < 1 or self.frozen_epochs < 0:
            raise ValueError("epochs >= 1 and frozen_epochs >= 0 required")
        if not 0.0 <= self.warmup_percentage <= 1.0:
            raise ValueError("warmup_percentage must be in [0, 1]")
        if not 0.0 <= self.pos_weight_alpha <= 1.0:
            raise ValueError("pos_weight_alpha must be in [0, 1]")
        if self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be > 0")


def compute_pos_weights(y: np.ndarray, alpha: float) -> np.ndarray:
    """Per-label positive-class weights (N_neg / N_pos) ** alpha; labels with
    no positives get weight 1 and a warning."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    y = np.asarray(y)
    pos = y.sum(axis=0).astype(np.float64)
    neg = y.shape[0] - pos
    weights = np.ones_like(pos)
    has_pos = pos > 0
    weights[has_pos] = (neg[has_pos] / pos[has_pos]) ** alpha
    if (~has_pos).any():
        logger.warning("%d label(s) without positives get pos_weight 1",
                       int((~has_pos).sum()))
    return weights


class CodingHead(nn.Module):
    """hidden-state -> hidden_dim -> |labels| logits."""

    def __init__(self, in_dim: int, hidden_dim: int, n_labels: int, dropout: float):
        super().__init__()
        self.dense = nn.Linear(in_dim, hidden_dim)
        self.activation = nn.ReLU()
        self.dropout = nn.Dropout(dropout)
        self.out = nn.Linear(hidden_dim, n_labels)

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        return self.out(self.dropout(self.activation(self.dense(pooled))))


class FinetuneModel(nn.Module):
    def __init__(self, backbone, head: CodingHead, pooling: str = "mean"):
        super().__init__()
        self.backbone = backbone
        self.head = head
        self.pooling = pooling

    def forward(self, input_ids, attention_mask) -> torch.Tensor:
        hidden = self.backbone(input_ids=input_ids,
                               attention_mask=attention_mask).last_hidden_state
        pooled = pool_hidden_states(hidden, attention_mask, self.pooling)
        return self.head(pooled)


@dataclass
class FinetuneResult:
    scores_path: str
    ids_path: str
    predictions_path: str
    epoch_losses: list[float]
    grad_norms: list[float] = field(repr=False, default_factory=list)
    backbone_state_before: dict = field(repr=False, default_factory=dict)
    backbone_state_after: dict = field(repr=False, default_factory=dict)


def _batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator).tolist()
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def finetune_lpft(
    dataset_path: str | Path,
    split_path: str | Path,
    vocabulary_path: str | Path,
    model_path: str | Path,
    params: FinetuneParams,
    out_dir: str | Path,
    pooling: str = "mean",
    max_seq_len: int = 128,
    threshold: float = 0.5,
) -> FinetuneResult:
    """Train on the split's train partition and write score/prediction files
    for every document in the dataset."""
    params.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = read_dataset(dataset_path)
    codes = read_vocabulary(vocabulary_path)
    split = read_split(split_path)
    y_all = label_matrix(records, codes)
    train_rows = [i for i, r in enumerate(records) if split.get(r.id) == "train"]
    if not train_rows:
        raise ValueError("split contains no train documents for this dataset")

    torch.manual_seed(params.seed)
    tokenizer = AutoTokenizer.from_pretrained(str(model_path))
    backbone = AutoModel.from_pretrained(str(model_path))
    head = CodingHead(backbone.config.hidden_size, params.hidden_dim,
                      len(codes), params.dropout)
    model = FinetuneModel(backbone, head, pooling)
    state_before = {k: v.detach().clone() for k, v in backbone.state_dict().items()}

    pos_weight = torch.tensor(
        compute_pos_weights(y_all[train_rows], params.pos_weight_alpha),
        dtype=torch.float32)
    criterion = nn.BCEWithLogitsLoss(pos_weight=pos_weight)

    optimizer = torch.optim.AdamW(
        [{"params": backbone.parameters(), "lr": params.lr},
         {"params": head.parameters(), "lr": params.lr_head}],
        weight_decay=WEIGHT_DECAY)
    steps_per_epoch = (len(train_rows) + params.batch_size - 1) // params.batch_size
    total_steps = params.epochs * steps_per_epoch
    warmup_steps = int(round(params.warmup_percentage * total_steps))
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: min(1.0, (step + 1) / warmup_steps) if warmup_steps else 1.0)

    texts = [r.text for r in records]
    generator = torch.Generator().manual_seed(params.seed)
    epoch_losses: list[float] = []
    grad_norms: list[float] = []
    step = 0
    for epoch in range(params.epochs):
        frozen = epoch < params.frozen_epochs
        for p in backbone.parameters():
            p.requires_grad_(not frozen)
        model.train()
        running = []
        for rows in _batches(len(train_rows), params.batch_size, generator):
            batch_rows = [train_rows[i] for i in rows]
            enc = tokenizer([texts[i] for i in batch_rows], truncation=True,
                            max_length=max_seq_len, padding=True,
                            return_tensors="pt")
            targets = torch.from_numpy(y_all[batch_rows])
            try:
                logits = model(enc["input_ids"], enc["attention_mask"])
                loss = criterion(logits, targets)
                if not torch.isfinite(loss):
                    raise DivergenceError(f"non-finite loss at step {step}")
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                nn.utils.clip_grad_norm_(
                    [p for p in model.parameters() if p.grad is not None],
                    params.max_grad_norm)
                post = torch.sqrt(sum(
                    p.grad.detach().pow(2).sum()
                    for p in model.parameters() if p.grad is not None))
                grad_norms.append(float(post))
                optimizer.step()
                scheduler.step()
            except torch.cuda.OutOfMemoryError as exc:  # pragma: no cover
                raise RuntimeError(
                    f"out of memory at step {step}; lower batch_size "
                    f"(currently {params.batch_size}) or max_seq_len") from exc
            running.append(loss.item())
            step += 1
        epoch_losses.append(float(np.mean(running)))

    state_after = {k: v.detach().clone() for k, v in backbone.state_dict().items()}

    scores = predict_scores(model, tokenizer, texts, max_seq_len, params.batch_size)
    scores_path = out_dir / "scores.emb1"
    ids_path = out_dir / "scores.ids"
    predictions_path = out_dir / "predictions.csv"
    write_emb1(scores_path, scores)
    write_ids(ids_path, [r.id for r in records])
    write_predictions_csv(predictions_path, records, codes, scores, threshold)
    return FinetuneResult(
        scores_path=str(scores_path), ids_path=str(ids_path),
        predictions_path=str(predictions_path), epoch_losses=epoch_losses,
        grad_norms=grad_norms, backbone_state_before=state_before,
        backbone_state_after=state_after)


def predict_scores(model: FinetuneModel, tokenizer, texts: list[str],
                   max_seq_len: int, batch_size: int) -> np.ndarray:
    model.eval()
    rows = []
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            enc = tokenizer(texts[start:start + batch_size], truncation=True,
                            max_length=max_seq_len, padding=True,
                            return_tensors="pt")
            logits = model(enc["input_ids"], enc["attention_mask"])
            rows.append(torch.sigmoid(logits).cpu().numpy().astype(np.float32))
    return np.vstack(rows)


def write_predictions_csv(path: str | Path, records, codes: list[str],
                          scores: np.ndarray, threshold: float) -> None:
    """``id,code,score`` rows for every score at or above the threshold."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "code", "score"])
        for i, record in enumerate(records):
            for j in np.flatnonzero(scores[i] >= threshold):
                writer.writerow([record.id, codes[j], repr(float(scores[i, j]))])
