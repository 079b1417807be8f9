"""Late-interaction dense retrieval over per-token embedding matrices.

An item's relevance to a query is the sum over query token embeddings of
the maximum dot product against the item's token embeddings. All rows are
unit-norm (checked at load within 1e-4), so dot products are cosines and
every per-token maximum lies in [-1, 1].
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, TextIO

import numpy as np

from .candidates import ScoredCandidate, rank_sort
from .errors import DimMismatch, DuplicateId, FormatError, NormError

NORM_TOLERANCE = 1e-4
_MAGIC = b"CRK1"


@dataclass
class EmbeddingStore:
    dim: int
    # item_id -> (num_tokens, dim) float64 matrix, every row unit-norm
    items: dict[str, np.ndarray]

    def __contains__(self, item_id: str) -> bool:
        return item_id in self.items

    def __len__(self) -> int:
        return len(self.items)


def _validate_matrix(item_id: str, matrix: np.ndarray, dim: int) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != dim:
        raise DimMismatch(
            f"item {item_id!r}: expected shape (*, {dim}), got {matrix.shape}")
    if matrix.shape[0] < 1:
        raise FormatError(f"item {item_id!r} has no token embeddings")
    norms = np.linalg.norm(matrix, axis=1)
    bad = np.abs(norms - 1.0) > NORM_TOLERANCE
    if bad.any():
        row = int(np.argmax(bad))
        raise NormError(
            f"item {item_id!r} row {row}: norm {norms[row]:.6f} is not "
            f"within {NORM_TOLERANCE} of 1")
    return matrix


def make_store(dim: int, items: dict[str, np.ndarray]) -> EmbeddingStore:
    """Validate matrices and assemble a store (used by generators/tests)."""
    checked = {i: _validate_matrix(i, m, dim) for i, m in items.items()}
    return EmbeddingStore(dim=dim, items=checked)


# -- binary format --------------------------------------------------------------
#
#   magic "CRK1"
#   u32le dim, u32le item_count
#   per item: u32le id_byte_len, utf-8 id bytes,
#             u32le token_count, token_count*dim float32le (row-major)

def write_store_binary(store: EmbeddingStore, stream: BinaryIO) -> None:
    stream.write(_MAGIC)
    stream.write(struct.pack("<II", store.dim, len(store.items)))
    for item_id, matrix in store.items.items():
        encoded = item_id.encode("utf-8")
        stream.write(struct.pack("<I", len(encoded)))
        stream.write(encoded)
        stream.write(struct.pack("<I", matrix.shape[0]))
        stream.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def _read_exact(stream: BinaryIO, count: int, what: str) -> bytes:
    data = stream.read(count)
    if len(data) != count:
        raise FormatError(f"truncated embedding store while reading {what}")
    return data


def read_store_binary(stream: BinaryIO) -> EmbeddingStore:
    magic = stream.read(4)
    if magic != _MAGIC:
        raise FormatError(f"bad embedding store magic {magic!r}")
    dim, count = struct.unpack("<II", _read_exact(stream, 8, "header"))
    if dim < 1:
        raise FormatError(f"embedding store declares dim {dim}")
    items: dict[str, np.ndarray] = {}
    for _ in range(count):
        (id_len,) = struct.unpack("<I", _read_exact(stream, 4, "id length"))
        item_id = _read_exact(stream, id_len, "item id").decode("utf-8")
        if item_id in items:
            raise DuplicateId(f"duplicate item {item_id!r} in embedding store")
        (tokens,) = struct.unpack(
            "<I", _read_exact(stream, 4, f"token count of {item_id!r}"))
        if tokens < 1:
            raise FormatError(f"item {item_id!r} has no token embeddings")
        raw = _read_exact(stream, tokens * dim * 4, f"vectors of {item_id!r}")
        matrix = np.frombuffer(raw, dtype="<f4").reshape(tokens, dim)
        items[item_id] = _validate_matrix(item_id, matrix, dim)
    trailing = stream.read(1)
    if trailing:
        raise FormatError("trailing bytes after last embedding record")
    return EmbeddingStore(dim=dim, items=items)


# -- textual format --------------------------------------------------------------
#
# JSON lines: {"id": item_id, "vectors": [[f, ...], ...]}
# The dimension is taken from the first row of the first record; any row of
# a different width is a DimMismatch.

def write_store_jsonl(store: EmbeddingStore, stream: TextIO) -> None:
    for item_id, matrix in store.items.items():
        stream.write(json.dumps(
            {"id": item_id, "vectors": matrix.tolist()}) + "\n")


def read_store_jsonl(stream: TextIO, path: str = "<store>") -> EmbeddingStore:
    items: dict[str, np.ndarray] = {}
    dim: int | None = None
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from None
        if not isinstance(record, dict) or "id" not in record \
                or "vectors" not in record:
            raise FormatError(
                f"{path}:{lineno}: record needs 'id' and 'vectors'")
        item_id = record["id"]
        vectors = record["vectors"]
        if not isinstance(item_id, str):
            raise FormatError(f"{path}:{lineno}: 'id' must be a string")
        if item_id in items:
            raise DuplicateId(f"{path}:{lineno}: duplicate item {item_id!r}")
        if not isinstance(vectors, list) or not vectors \
                or not all(isinstance(r, list) for r in vectors):
            raise FormatError(
                f"{path}:{lineno}: 'vectors' must be a non-empty list of rows")
        if dim is None:
            dim = len(vectors[0])
            if dim < 1:
                raise FormatError(f"{path}:{lineno}: empty embedding row")
        for row in vectors:
            if len(row) != dim:
                raise DimMismatch(
                    f"{path}:{lineno}: item {item_id!r} has a row of width "
                    f"{len(row)}, expected {dim}")
        items[item_id] = _validate_matrix(
            item_id, np.array(vectors, dtype=np.float64), dim)
    if dim is None:
        raise FormatError(f"{path}: embedding store has no records")
    return EmbeddingStore(dim=dim, items=items)


def load_embedding_store(path: str) -> EmbeddingStore:
    """Load a store, sniffing binary (magic bytes) vs JSON-lines."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        with open(path, "rb") as fh:
            return read_store_binary(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return read_store_jsonl(fh, path=path)


# -- scoring ---------------------------------------------------------------------

def maxsim(query_matrix: np.ndarray, item_matrix: np.ndarray) -> float:
    """Sum over query rows of the max dot product against item rows."""
    q = np.asarray(query_matrix, dtype=np.float64)
    d = np.asarray(item_matrix, dtype=np.float64)
    if q.ndim != 2 or d.ndim != 2:
        raise DimMismatch("maxsim expects 2-d matrices")
    if q.shape[1] != d.shape[1]:
        raise DimMismatch(
            f"query dim {q.shape[1]} != item dim {d.shape[1]}")
    if q.shape[0] < 1 or d.shape[0] < 1:
        raise ValueError("maxsim needs at least one row on each side")
    return float((q @ d.T).max(axis=1).sum())


def search_dense(query_matrix: np.ndarray, store: EmbeddingStore,
                 k: int) -> list[ScoredCandidate]:
    """Top-k store items by maxsim; zero and negative scores are kept."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query_matrix, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != store.dim:
        raise DimMismatch(
            f"query matrix shape {q.shape} does not match store dim "
            f"{store.dim}")
    candidates = [
        ScoredCandidate(item_id=item_id, score=maxsim(q, matrix),
                        stage="dense")
        for item_id, matrix in sorted(store.items.items())
    ]
    return rank_sort(candidates)[:k]
