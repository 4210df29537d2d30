"""Shared classifier machinery: column access for tree builders, score
thresholding, and the versioned binary model artifact.

Artifact layout: magic ``ICDM``, u32 little-endian header length, a UTF-8
JSON header (family, version, params, ordered blob descriptors), then the
raw blobs: little-endian float64/int64 arrays, row-major. Round trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

MODEL_MAGIC = b"ICDM"
MODEL_VERSION = 1

_DTYPES = {"f8": "<f8", "i8": "<i8"}


class DimensionError(ValueError):
    """Feature dimension of the input does not match the fitted model."""


def check_feature_dim(X, expected: int) -> None:
    if X.shape[1] != expected:
        raise DimensionError(f"expected {expected} features, got {X.shape[1]}")


def threshold_scores(scores: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binary label matrix: score >= threshold."""
    return (np.asarray(scores) >= threshold).astype(np.int8)


class ColumnAccess:
    """Dense column views over a dense or sparse design matrix.

    Sparse inputs are kept in CSC; requested columns are densified lazily and
    cached, which is the access pattern tree builders need.
    """

    def __init__(self, X):
        self.n_rows = X.shape[0]
        self.n_cols = X.shape[1]
        if sp.issparse(X):
            self._csc = X.tocsc()
            self._dense = None
            self._cache: dict[int, np.ndarray] = {}
        else:
            self._csc = None
            self._dense = np.asarray(X, dtype=np.float64)

    def column(self, j: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense[:, j]
        col = self._cache.get(j)
        if col is None:
            start, end = self._csc.indptr[j], self._csc.indptr[j + 1]
            col = np.zeros(self.n_rows)
            col[self._csc.indices[start:end]] = self._csc.data[start:end]
            self._cache[j] = col
        return col


def midpoint_thresholds(sorted_values: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Split thresholds between sorted_values[i] and [i+1]; guarded so that
    ``x <= threshold`` routes exactly positions 0..i left even when the
    midpoint rounds up to the right value."""
    lo = sorted_values[positions]
    hi = sorted_values[positions + 1]
    thr = lo + (hi - lo) / 2.0
    return np.where(thr >= hi, lo, thr)


def save_model_artifact(path: str | Path, family: str, params: dict,
                        meta: dict, blobs: list[tuple[str, np.ndarray]]) -> None:
    descriptors = []
    payload = bytearray()
    for name, arr in blobs:
        arr = np.ascontiguousarray(arr)
        if arr.dtype.kind == "f":
            code, arr = "f8", arr.astype("<f8", copy=False)
        elif arr.dtype.kind in "iub":
            code, arr = "i8", arr.astype("<i8")
        else:
            raise ValueError(f"unsupported blob dtype {arr.dtype}")
        descriptors.append({"name": name, "shape": list(arr.shape), "dtype": code})
        payload.extend(arr.tobytes(order="C"))
    header = json.dumps(
        {"family": family, "version": MODEL_VERSION, "params": params,
         "meta": meta, "blobs": descriptors}
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(bytes(payload))


def load_model_artifact(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Returns (header, blobs by name)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        (header_len,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(header_len).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for desc in header["blobs"]:
            shape = tuple(desc["shape"])
            dtype = np.dtype(_DTYPES[desc["dtype"]])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * dtype.itemsize)
            if len(buf) != count * dtype.itemsize:
                raise ValueError(f"{path}: truncated blob {desc['name']}")
            arrays[desc["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return header, arrays
