"""EMB1 dense-matrix interchange format and document-aligned ingestion.

EMB1 layout: 4-byte magic ``EMB1``, then two unsigned 32-bit little-endian
integers (row count, dimension), then rows*dim IEEE-754 32-bit little-endian
floats, row-major. A plain-text ids file labels matrix rows: the i-th line is
the document id of the i-th row.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


class EmbeddingFormatError(ValueError):
    """Corrupt or inconsistent EMB1 / ids input."""


def write_emb1(path: str | Path, matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise ValueError("EMB1 stores 2-D matrices")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, matrix.shape[0], matrix.shape[1]))
        f.write(matrix.astype("<f4", copy=False).tobytes(order="C"))


def read_emb1(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise EmbeddingFormatError(f"{path}: truncated header")
        magic, rows, dim = _HEADER.unpack(header)
        if magic != MAGIC:
            raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
        payload = f.read(rows * dim * 4 + 4)
    if len(payload) < rows * dim * 4:
        have = len(payload) // (dim * 4) if dim else 0
        raise EmbeddingFormatError(
            f"{path}: truncated payload, header says {rows} rows but only {have} present"
        )
    if len(payload) > rows * dim * 4:
        raise EmbeddingFormatError(f"{path}: trailing bytes after {rows}x{dim} payload")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()


def write_ids(path: str | Path, ids: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc_id in ids:
            f.write(doc_id + "\n")


def read_ids(path: str | Path) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]


def load_embeddings(matrix_path: str | Path, ids_path: str | Path, dataset) -> np.ndarray:
    """Read an EMB1 matrix and reorder its rows to dataset document order.

    The ids file must cover every dataset document exactly once; missing and
    extra ids are reported in the error. Non-finite values are rejected.
    """
    matrix = read_emb1(matrix_path)
    ids = read_ids(ids_path)
    if len(ids) != matrix.shape[0]:
        raise EmbeddingFormatError(
            f"{ids_path}: {len(ids)} ids for {matrix.shape[0]} matrix rows"
        )
    if not np.isfinite(matrix).all():
        bad = int(np.argwhere(~np.isfinite(matrix))[0][0])
        raise EmbeddingFormatError(f"{matrix_path}: non-finite value in row {bad}")
    row_of = {doc_id: i for i, doc_id in enumerate(ids)}
    if len(row_of) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise EmbeddingFormatError(f"{ids_path}: duplicate id(s) {', '.join(dupes[:5])}")
    dataset_ids = dataset.ids
    missing = [i for i in dataset_ids if i not in row_of]
    extra = [i for i in ids if i not in set(dataset_ids)]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing ids: {', '.join(missing[:5])}")
        if extra:
            parts.append(f"extra ids: {', '.join(extra[:5])}")
        raise EmbeddingFormatError(f"{ids_path}: {'; '.join(parts)}")
    order = np.array([row_of[i] for i in dataset_ids], dtype=np.int64)
    return matrix[order]
