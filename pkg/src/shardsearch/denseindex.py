"""Flat dense-vector index: exhaustive inner-product top-k, merge, persistence.

Vectors are float32 rows in insertion order. Scores are raw inner products
accumulated strictly left-to-right in float32 (column-sequential over the
whole table), so results are bit-reproducible and independent of BLAS
reduction order.

File format (``.fvi``, little-endian):
    magic "FVI1" | u32 dim | u64 count | id table | vectors | u32 CRC32
where the id table is count length-prefixed (u32) UTF-8 strings, vectors are
count*dim float32 row-major, and the checksum covers id table + vectors.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    CorruptFile,
    DimensionMismatch,
    DuplicateId,
    InvalidArgs,
    NonFiniteValue,
)
from .results import RankedList, ScoredDoc

MAGIC = b"FVI1"


@dataclass(frozen=True)
class EmbeddingSpec:
    """Encoder output contract: vector width and tokenizer truncation limit."""

    dim: int = 768
    max_tokens: int = 512

    def __post_init__(self):
        if self.dim <= 0 or self.max_tokens <= 0:
            raise InvalidArgs("dim and max_tokens must be positive")


def dot_products(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Inner products of every row with ``query``, float32, left-to-right.

    Each row's accumulator starts at 0.0f and adds one product per column in
    index order; rows are independent lanes, so vectorizing across rows keeps
    the per-row order exact.
    """
    acc = np.zeros(matrix.shape[0], dtype=np.float32)
    for j in range(matrix.shape[1]):
        acc += matrix[:, j] * query[j]
    return acc


class FlatVectorIndex:
    """Fixed-width float32 vector table keyed by doc id, exhaustively searchable."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise InvalidArgs(f"dim must be positive, got {dim}")
        self.dim = dim
        self._ids: list[str] = []
        self._pos: dict[str, int] = {}
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._ids)

    def ids(self) -> list[str]:
        return list(self._ids)

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self._pos

    def add(self, doc_id: str, vector) -> None:
        row = np.asarray(vector, dtype=np.float32)
        if row.shape != (self.dim,):
            raise DimensionMismatch(
                f"vector for {doc_id!r} has shape {row.shape}, index dim is {self.dim}"
            )
        if not np.all(np.isfinite(row)):
            raise NonFiniteValue(f"vector for {doc_id!r} contains NaN or infinity")
        if doc_id in self._pos:
            raise DuplicateId(f"vector id {doc_id!r} added twice")
        self._pos[doc_id] = len(self._ids)
        self._ids.append(doc_id)
        self._rows.append(row)
        self._matrix = None

    def matrix(self) -> np.ndarray:
        """The (count, dim) float32 table in insertion order."""
        if self._matrix is None or self._matrix.shape[0] != len(self._rows):
            if self._rows:
                self._matrix = np.vstack(self._rows)
            else:
                self._matrix = np.zeros((0, self.dim), dtype=np.float32)
        return self._matrix

    def vector(self, doc_id: str) -> np.ndarray:
        pos = self._pos.get(doc_id)
        if pos is None:
            raise KeyError(doc_id)
        return self._rows[pos]

    def search(self, query, k: int) -> RankedList:
        """Exact top-k by inner product; ties break by doc id ascending."""
        q = np.asarray(query, dtype=np.float32)
        if q.shape != (self.dim,):
            raise DimensionMismatch(f"query shape {q.shape}, index dim is {self.dim}")
        if not np.all(np.isfinite(q)):
            raise NonFiniteValue("query contains NaN or infinity")
        if k < 0:
            raise InvalidArgs(f"k must be >= 0, got {k}")
        if k == 0 or not self._ids:
            return RankedList()
        scores = dot_products(self.matrix(), q)
        ids = np.asarray(self._ids)
        order = np.lexsort((ids, -scores))[: min(k, len(self._ids))]
        entries = [
            ScoredDoc(doc_id=str(ids[i]), score=float(scores[i])) for i in order
        ]
        return RankedList(entries=entries)

    # --- persistence ---

    def save(self, path: str | Path) -> None:
        parts = [MAGIC, struct.pack("<IQ", self.dim, len(self._ids))]
        payload = bytearray()
        for doc_id in self._ids:
            raw = doc_id.encode("utf-8")
            payload += struct.pack("<I", len(raw)) + raw
        payload += self.matrix().astype("<f4", copy=False).tobytes(order="C")
        parts.append(bytes(payload))
        parts.append(struct.pack("<I", zlib.crc32(bytes(payload))))
        Path(path).write_bytes(b"".join(parts))

    @classmethod
    def load(cls, path: str | Path) -> "FlatVectorIndex":
        blob = Path(path).read_bytes()
        if len(blob) < len(MAGIC) + 12 + 4:
            raise CorruptFile(f"{path}: file shorter than fixed header")
        if blob[: len(MAGIC)] != MAGIC:
            raise CorruptFile(f"{path}: bad magic bytes {blob[:4]!r}")
        dim, count = struct.unpack_from("<IQ", blob, len(MAGIC))
        payload = blob[len(MAGIC) + 12 : -4]
        (crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
        if zlib.crc32(payload) != crc:
            raise CorruptFile(f"{path}: payload checksum mismatch")

        offset = 0
        ids = []
        for _ in range(count):
            if offset + 4 > len(payload):
                raise CorruptFile(f"{path}: truncated id table")
            (id_len,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            if offset + id_len > len(payload):
                raise CorruptFile(f"{path}: truncated id table")
            ids.append(payload[offset : offset + id_len].decode("utf-8"))
            offset += id_len
        vector_bytes = payload[offset:]
        expected = count * dim * 4
        if len(vector_bytes) != expected:
            raise CorruptFile(
                f"{path}: vector payload {len(vector_bytes)} bytes, expected {expected}"
            )
        index = cls(dim=int(dim))
        table = np.frombuffer(vector_bytes, dtype="<f4").reshape(count, dim)
        for doc_id, row in zip(ids, table):
            index.add(doc_id, row)
        return index


def add_vector(index: FlatVectorIndex, doc_id: str, vector) -> FlatVectorIndex:
    index.add(doc_id, vector)
    return index


def search_dense(index: FlatVectorIndex, query, k: int) -> RankedList:
    return index.search(query, k)


def merge_dense(
    parts: Iterable[FlatVectorIndex], dim: int | None = None
) -> FlatVectorIndex:
    """Concatenate finalized part indexes; ids must be globally unique."""
    parts = list(parts)
    if not parts:
        if dim is None:
            raise InvalidArgs("merging zero parts requires an explicit dim")
        return FlatVectorIndex(dim=dim)
    first_dim = parts[0].dim
    for part in parts:
        if part.dim != first_dim:
            raise DimensionMismatch(
                f"cannot merge parts of dims {first_dim} and {part.dim}"
            )
    if dim is not None and dim != first_dim:
        raise DimensionMismatch(f"declared dim {dim} != part dim {first_dim}")
    merged = FlatVectorIndex(dim=first_dim)
    for part in parts:
        for doc_id, row in zip(part.ids(), part.matrix()):
            merged.add(doc_id, row)
    return merged


def persist_dense(index: FlatVectorIndex, path: str | Path) -> None:
    index.save(path)


def load_dense(path: str | Path) -> FlatVectorIndex:
    return FlatVectorIndex.load(path)
