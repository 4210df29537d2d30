"""Deterministic multilabel iterative stratified splitting.

Greedy stratification: repeatedly take the label with the fewest remaining
unassigned positives and deal each of its unassigned documents to the
partition with the greatest remaining demand for that label; ties break on
overall remaining capacity, then on seeded randomness. Documents without
labels are distributed by ratio. The per-label positive counts of every
partition land within +-1 of the exact proportional target for rare labels
and within 10% relative for labels with at least 20 positives.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PARTITIONS = ("train", "validation", "test")
DEFAULT_RATIOS = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class SplitAssignment:
    """Document id -> partition tag, plus the ratios and seed that produced it."""

    partitions: dict[str, str]
    ratios: tuple[float, ...]
    seed: int
    warnings: tuple[str, ...] = ()

    def ids_for(self, partition: str) -> list[str]:
        return [i for i, p in self.partitions.items() if p == partition]

    def save(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["id", "partition"])
            for doc_id, part in self.partitions.items():
                w.writerow([doc_id, part])


def load_split(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["id", "partition"]:
            raise ValueError(f"{path}: expected header 'id,partition'")
        for row in reader:
            if not row:
                continue
            if row[1] not in PARTITIONS:
                raise ValueError(f"{path}: unknown partition {row[1]!r}")
            out[row[0]] = row[1]
    return out


def _largest_remainder(total: int, ratios: np.ndarray) -> np.ndarray:
    """Integer partition sizes matching ``ratios`` exactly up to rounding."""
    exact = total * ratios
    floors = np.floor(exact).astype(np.int64)
    rest = total - floors.sum()
    order = np.argsort(-(exact - floors), kind="stable")
    floors[order[:rest]] += 1
    return floors


def iterative_stratified_split(
    label_matrix: np.ndarray,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> tuple[np.ndarray, list[str]]:
    """Assign every row to a partition index (0=train, 1=validation, 2=test).

    Returns the assignment array plus warnings for labels whose lone positive
    was forced into train (single exemplars cannot be stratified).
    """
    ratios_arr = np.asarray(ratios, dtype=np.float64)
    if ratios_arr.min() <= 0 or abs(ratios_arr.sum() - 1.0) > 1e-9:
        raise ValueError("ratios must be positive and sum to 1")
    Y = np.asarray(label_matrix) != 0
    n, n_labels = Y.shape
    if n == 0:
        raise ValueError("at least one document required")

    rng = np.random.default_rng(seed)
    assignment = np.full(n, -1, dtype=np.int64)
    label_counts = Y.sum(axis=0)

    # Remaining per-label demand and per-partition capacity.
    demand = label_counts[:, None] * ratios_arr[None, :]
    capacity = n * ratios_arr.copy()

    docs_of_label = [np.flatnonzero(Y[:, l]) for l in range(n_labels)]
    warnings: list[str] = []

    def assign(doc: int, part: int) -> None:
        assignment[doc] = part
        demand[Y[doc], part] -= 1.0
        capacity[part] -= 1.0

    # Rarest label first; its unassigned documents go to the partition with
    # the greatest remaining demand among partitions that still have capacity.
    # Single-positive labels are therefore dealt first and land in train
    # (the dominant-ratio partition); they cannot be stratified.
    while True:
        remaining = np.array(
            [np.sum(assignment[docs] < 0) for docs in docs_of_label], dtype=np.int64
        )
        active = np.flatnonzero(remaining > 0)
        if active.size == 0:
            break
        l = int(active[np.argmin(remaining[active])])
        for doc in docs_of_label[l]:
            if assignment[doc] >= 0:
                continue
            eligible = np.flatnonzero(capacity > 1e-9)
            if eligible.size == 0:
                eligible = np.arange(len(ratios_arr))
            best = demand[l, eligible].max()
            # A full partition may still take the document when its demand
            # advantage exceeds one whole document; this keeps every label's
            # final counts within +-1 of target even for the label dealt last,
            # at the cost of letting partition sizes drift slightly.
            if demand[l].max() - best >= 1.0:
                eligible = np.arange(len(ratios_arr))
                best = demand[l].max()
            tied = eligible[np.flatnonzero(demand[l, eligible] >= best - 1e-9)]
            if tied.size > 1:
                caps = capacity[tied]
                tied = tied[np.flatnonzero(caps >= caps.max() - 1e-9)]
            part = int(tied[0]) if tied.size == 1 else int(tied[rng.integers(tied.size)])
            assign(int(doc), part)

    for l in np.flatnonzero(label_counts == 1):
        part = PARTITIONS[assignment[docs_of_label[l][0]]]
        warnings.append(f"label column {l}: single positive cannot be stratified, in {part}")

    unlabeled = np.flatnonzero(assignment < 0)
    if unlabeled.size:
        sizes = _largest_remainder(unlabeled.size, ratios_arr)
        order = rng.permutation(unlabeled)
        start = 0
        for part, size in enumerate(sizes):
            assignment[order[start:start + size]] = part
            start += size

    return assignment, warnings


def split_dataset(
    dataset,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> SplitAssignment:
    """Stratify a dataset's labeled documents; unlabeled documents are also
    assigned (by ratio) so downstream consumers can ignore or keep them."""
    tags, warnings = iterative_stratified_split(dataset.label_matrix(), ratios, seed)
    partitions = {doc.id: PARTITIONS[tags[i]] for i, doc in enumerate(dataset.documents)}
    return SplitAssignment(partitions=partitions, ratios=tuple(ratios), seed=seed,
                           warnings=tuple(warnings))


def partition_deviation_report(
    label_matrix: np.ndarray,
    assignment: np.ndarray,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
) -> list[dict]:
    """Per-label stratification quality: actual vs proportional-target counts.

    A label meets the contract when every partition count is within +-1 of
    target, or within 10% relative for labels with >= 20 positives.
    """
    Y = np.asarray(label_matrix) != 0
    ratios_arr = np.asarray(ratios, dtype=np.float64)
    rows = []
    for l in range(Y.shape[1]):
        support = int(Y[:, l].sum())
        targets = support * ratios_arr
        actual = np.array([int(Y[assignment == p, l].sum()) for p in range(len(ratios))])
        dev = np.abs(actual - targets)
        ok = bool(
            np.all((dev <= 1.0 + 1e-9) | ((support >= 20) & (dev <= 0.10 * targets + 1e-9)))
        )
        rows.append(
            {
                "label": l,
                "support": support,
                "targets": targets.tolist(),
                "actual": actual.tolist(),
                "within_bounds": ok,
            }
        )
    return rows
