"""Multi-label evaluation: per-label confusion counts, micro/macro precision,
recall and F1, and the per-class diagnostic report.

Every document-code pair is treated as an independent instance. Degenerate
ratios (0/0) are defined as 0 and the reports carry an explicit
``zero_division`` policy tag so downstream consumers know the convention.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ZERO_DIVISION_POLICY = "zero"


@dataclass(frozen=True)
class LabelCounts:
    """Per-label true positives, false positives, false negatives and support."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.tp + self.fn

    @property
    def n_labels(self) -> int:
        return int(self.tp.shape[0])


@dataclass(frozen=True)
class MetricsReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    precision_micro: float
    recall_micro: float
    f1_micro: float
    f1_macro: float
    zero_division: str = ZERO_DIVISION_POLICY
    macro_present_only: bool = False

    def summary(self) -> dict:
        """The six aggregate numbers plus policy tags, JSON-ready."""
        return {
            "precision_micro": self.precision_micro,
            "recall_micro": self.recall_micro,
            "f1_micro": self.f1_micro,
            "f1_macro": self.f1_macro,
            "zero_division": self.zero_division,
            "macro_present_only": self.macro_present_only,
        }


def _check_shapes(y_true: np.ndarray, y_pred: np.ndarray) -> None:
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"shape mismatch: y_true {y_true.shape} vs y_pred {y_pred.shape}"
        )


def confusion_counts(y_true: np.ndarray, y_pred: np.ndarray) -> LabelCounts:
    """Exact per-label TP/FP/FN over binary indicator matrices (docs x labels)."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    _check_shapes(y_true, y_pred)
    t = y_true != 0
    p = y_pred != 0
    tp = (t & p).sum(axis=0).astype(np.int64)
    fp = (~t & p).sum(axis=0).astype(np.int64)
    fn = (t & ~p).sum(axis=0).astype(np.int64)
    return LabelCounts(tp=tp, fp=fp, fn=fn)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def per_label_scores(counts: LabelCounts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-label precision, recall and F1 with the 0/0 -> 0 convention."""
    precision = _safe_div(counts.tp.astype(np.float64), (counts.tp + counts.fp).astype(np.float64))
    recall = _safe_div(counts.tp.astype(np.float64), (counts.tp + counts.fn).astype(np.float64))
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def micro_scores(counts: LabelCounts) -> tuple[float, float, float]:
    """Globally pooled precision/recall and their harmonic mean."""
    tp = float(counts.tp.sum())
    fp = float(counts.fp.sum())
    fn = float(counts.fn.sum())
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def macro_f1(counts: LabelCounts, present_only: bool = False) -> float:
    """Unweighted mean of per-label F1.

    By default the mean runs over *all* labels, including labels with zero
    support (which contribute F1=0 unless they also have zero predictions, in
    which case they still contribute 0 under the zero-division policy). With
    ``present_only`` the mean is restricted to labels with support > 0.
    """
    _, _, f1 = per_label_scores(counts)
    if present_only:
        mask = counts.support > 0
        if not mask.any():
            return 0.0
        return float(f1[mask].mean())
    return float(f1.mean())


def evaluate(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    macro_present_only: bool = False,
) -> MetricsReport:
    counts = confusion_counts(y_true, y_pred)
    precision, recall, f1 = per_label_scores(counts)
    p_micro, r_micro, f1_micro = micro_scores(counts)
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1,
        support=counts.support,
        precision_micro=p_micro,
        recall_micro=r_micro,
        f1_micro=f1_micro,
        f1_macro=macro_f1(counts, present_only=macro_present_only),
        macro_present_only=macro_present_only,
    )


@dataclass(frozen=True)
class PerClassRow:
    code: str
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool


def per_class_report(
    counts: LabelCounts,
    codes: list[str],
    sort_by_support: bool = True,
) -> list[PerClassRow]:
    """One row per label: code, precision, recall, f1, support.

    Rows where any ratio hit the 0/0 case carry ``zero_division=True``.
    """
    if len(codes) != counts.n_labels:
        raise ValueError(f"{len(codes)} codes for {counts.n_labels} labels")
    precision, recall, f1 = per_label_scores(counts)
    support = counts.support
    degenerate = ((counts.tp + counts.fp) == 0) | ((counts.tp + counts.fn) == 0)
    rows = [
        PerClassRow(
            code=codes[l],
            precision=float(precision[l]),
            recall=float(recall[l]),
            f1=float(f1[l]),
            support=int(support[l]),
            zero_division=bool(degenerate[l]),
        )
        for l in range(counts.n_labels)
    ]
    if sort_by_support:
        rows.sort(key=lambda r: (-r.support, r.code))
    return rows


def write_per_class_csv(path: str | Path, rows: list[PerClassRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["code", "precision", "recall", "f1", "support", "zero_division"])
        for r in rows:
            w.writerow([r.code, repr(r.precision), repr(r.recall), repr(r.f1), r.support, int(r.zero_division)])


def write_summary_json(path: str | Path, reports: dict[str, MetricsReport]) -> None:
    """Summary JSON keyed by partition name (e.g. validation/test)."""
    payload = {name: rep.summary() for name, rep in reports.items()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
