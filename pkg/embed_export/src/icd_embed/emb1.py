"""EMB1 dense-matrix interchange format (writer/reader).

Layout: 4-byte magic ``EMB1``, u32-LE row count, u32-LE dimension, then
rows*dim IEEE-754 float32-LE values, row-major. The ids sidecar is plain
text, one document id per line, the i-th line labeling the i-th matrix row.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


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
            raise ValueError(f"{path}: truncated header")
        magic, rows, dim = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        payload = f.read()
    if len(payload) != rows * dim * 4:
        raise ValueError(f"{path}: payload does not match {rows}x{dim} header")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()


def write_ids(path: str | Path, ids: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc_id in ids:
            f.write(doc_id + "\n")


def read_ids(path: str | Path) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]
