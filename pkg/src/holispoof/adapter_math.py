"""Weight-decomposed low-rank adapter merge on small dense matrices.

The merged weight keeps the direction of ``W0 + B @ A`` column by column
and rescales each column to a learned magnitude::

    W'[:, j] = m[j] * (W0 + B A)[:, j] / ||(W0 + B A)[:, j]||_2
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DataError, DimensionMismatchError, ZeroColumnNormError


def _matrix(x: Any, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or 0 in arr.shape:
        raise DimensionMismatchError(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} has non-finite entries")
    return arr


def column_norms(M: Any) -> np.ndarray:
    """Euclidean norm of every column."""
    M = np.asarray(M, dtype=np.float64)
    return np.sqrt(np.sum(M * M, axis=0))


def dora_merge(W0: Any, B: Any, A: Any, m: Any) -> np.ndarray:
    W0 = _matrix(W0, "W0")
    B = _matrix(B, "B")
    A = _matrix(A, "A")
    m = np.asarray(m, dtype=np.float64).reshape(-1)
    d, k = W0.shape
    r = B.shape[1]
    if B.shape[0] != d or A.shape != (r, k):
        raise DimensionMismatchError(f"need B (d x r) and A (r x k) for W0 {W0.shape}; got B {B.shape}, A {A.shape}")
    if r > min(d, k):
        raise DimensionMismatchError(f"rank {r} exceeds min(d, k) = {min(d, k)}")
    if m.shape != (k,):
        raise DimensionMismatchError(f"magnitude needs {k} entries, got {m.shape[0]}")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise DataError("magnitude entries must be finite and positive")

    V = W0 + B @ A
    norms = column_norms(V)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroColumnNormError(f"columns {zero.tolist()} of W0 + BA have zero norm")
    return V * (m / norms)


def load_params(path: str | Path) -> dict[str, np.ndarray]:
    """Read ``{"W0": rows, "B": rows, "A": rows, "m": [...]}`` from JSON."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        return {k: np.asarray(obj[k], dtype=np.float64) for k in ("W0", "B", "A", "m")}
    except KeyError as exc:
        raise DataError(f"parameter file lacks {exc}") from None


def matrix_to_json(M: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(M)]
