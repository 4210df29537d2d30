"""Readers for the pipeline's file interfaces: JSONL datasets, label
vocabulary CSVs and split CSVs."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

PARTITIONS = ("train", "validation", "test")


@dataclass(frozen=True)
class Record:
    id: str
    text: str
    codes: tuple[str, ...]


def read_dataset(path: str | Path) -> list[Record]:
    """One ``{"id","text","codes"}`` object per line."""
    records: list[Record] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                records.append(Record(id=str(raw["id"]), text=str(raw["text"]),
                                      codes=tuple(str(c) for c in raw["codes"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad record ({exc})") from exc
    return records


def read_vocabulary(path: str | Path) -> list[str]:
    """Ordered code list from a ``code,description`` CSV; duplicate codes keep
    their first occurrence."""
    codes: list[str] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[0].strip().lower() != "code":
            raise ValueError(f"{path}: expected header 'code,description'")
        for row in reader:
            if not row or not row[0].strip():
                continue
            code = row[0].strip()
            if code.upper() in seen:
                continue
            seen.add(code.upper())
            codes.append(code)
    return codes


def read_split(path: str | Path) -> dict[str, str]:
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


def label_matrix(records: list[Record], codes: list[str]):
    import numpy as np

    index = {c: j for j, c in enumerate(codes)}
    y = np.zeros((len(records), len(codes)), dtype=np.float32)
    for i, record in enumerate(records):
        for code in record.codes:
            if code not in index:
                raise ValueError(f"record {record.id}: unknown code {code}")
            y[i, index[code]] = 1.0
    return y
