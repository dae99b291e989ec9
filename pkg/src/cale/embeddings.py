"""Dense occurrence-keyed embedding matrices, the CALEEMB1 file format, and the
cosine kernel every evaluation module shares.

Storage is 32-bit; similarity and mean reductions accumulate in 64-bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError

EMB_MAGIC = b"CALEEMB1"


@dataclass
class EmbeddingMatrix:
    """n x d float32 matrix with a bijective occurrence-id -> row index."""

    ids: list[str]
    rows: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise ValueError(f"embedding rows must be 2-D, got shape {rows.shape}")
        if rows.shape[1] < 1:
            raise ValueError("embedding dimension must be >= 1")
        if len(self.ids) != rows.shape[0]:
            raise ValueError(f"{len(self.ids)} ids for {rows.shape[0]} rows")
        index: dict[str, int] = {}
        for i, occ_id in enumerate(self.ids):
            if occ_id in index:
                raise ValueError(f"duplicate occurrence id {occ_id!r}")
            index[occ_id] = i
        if rows.size and not np.isfinite(rows).all():
            raise ValueError("embedding rows contain non-finite values")
        zero = ~np.any(rows != 0.0, axis=1)
        if zero.any():
            bad = self.ids[int(np.flatnonzero(zero)[0])]
            raise ValueError(f"all-zero embedding row for id {bad!r}")
        self.rows = rows
        self.index = index

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def vector(self, occ_id: str) -> np.ndarray:
        try:
            return self.rows[self.index[occ_id]]
        except KeyError:
            raise KeyError(f"occurrence id {occ_id!r} not in embedding index") from None

    def row_indices(self, occ_ids: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self.index[i] for i in occ_ids], dtype=np.intp)
        except KeyError as e:
            raise KeyError(f"occurrence id {e.args[0]!r} not in embedding index") from None


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between u and v, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"incompatible vector shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    sim = float(np.dot(u / nu, v / nv))
    return min(1.0, max(-1.0, sim))


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    return 1.0 - cosine_similarity(u, v)


def mean_vector(occ_ids: Sequence[str], matrix: EmbeddingMatrix) -> np.ndarray:
    """Coordinate-wise arithmetic mean of the selected rows (64-bit)."""
    if len(occ_ids) == 0:
        raise ValueError("mean_vector of an empty id set is undefined")
    idx = matrix.row_indices(occ_ids)
    return matrix.rows[idx].astype(np.float64).mean(axis=0)


def unit_rows(rows: np.ndarray) -> np.ndarray:
    """Rows normalized to unit length in float64; rejects zero rows."""
    rows64 = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows64, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return rows64 / norms[:, None]


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    for occ_id in matrix.ids:
        if "\n" in occ_id:
            raise ValueError(f"occurrence id {occ_id!r} contains a newline")
    id_block = "".join(i + "\n" for i in matrix.ids).encode("utf-8")
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<II", matrix.n, matrix.dim))
        f.write(np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes())
        f.write(struct.pack("<I", len(id_block)))
        f.write(id_block)


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(EMB_MAGIC) + 8 or data[: len(EMB_MAGIC)] != EMB_MAGIC:
        raise FormatError(f"{path}: not a CALEEMB1 file (bad magic)")
    n, d = struct.unpack_from("<II", data, len(EMB_MAGIC))
    off = len(EMB_MAGIC) + 8
    payload = n * d * 4
    if len(data) < off + payload + 4:
        raise FormatError(f"{path}: truncated payload (expected {n}x{d} float32 rows)")
    rows = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d).copy()
    off += payload
    (id_len,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + id_len:
        raise FormatError(f"{path}: truncated id block")
    ids = data[off : off + id_len].decode("utf-8").split("\n")
    if ids and ids[-1] == "":
        ids.pop()
    if len(ids) != n:
        raise FormatError(f"{path}: id count {len(ids)} disagrees with row count {n}")
    try:
        return EmbeddingMatrix(ids=ids, rows=rows)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e
