"""Exact top-k squared-L2 search over a flat, immutable vector collection.

Vectors are stored as float32; distances are accumulated in float64.
All reported distances are *squared* Euclidean distances.  Exact ties are
broken by insertion order, so results are fully deterministic.

File format (little-endian, uncompressed)::

    b"NXIDX1"                      magic + format version
    u32 dim
    u64 count
    count x [u64 id_len, id_len bytes UTF-8 id, dim x f32]
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateId,
    EmptyCollection,
    IndexFileError,
    KTooLarge,
    TruncatedFile,
    VersionMismatch,
)

MAGIC = b"NXIDX1"
_MAGIC_STEM = MAGIC[:5]

# Upper bound on the float64 scratch block used by batch_search (bytes).
_BLOCK_BYTES = 16 * 1024 * 1024


def as_vector(values, dim: int | None = None) -> np.ndarray:
    """Validate ``values`` as a finite 1-D vector and return it as float32."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty 1-D vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionMismatch(f"expected dim {dim}, got {vec.shape[0]}")
    vec = vec.astype(np.float32)
    if not np.all(np.isfinite(vec)):
        raise DimensionMismatch("vector contains non-finite values")
    return vec


class FlatIndex:
    """Exhaustive exact index.  Immutable once built."""

    def __init__(self, ids: Sequence[str], vectors: np.ndarray):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        vectors.setflags(write=False)
        self._ids = tuple(ids)
        self._vectors = vectors
        self._vectors64 = vectors.astype(np.float64)
        self._vectors64.setflags(write=False)
        self._positions = {id_: i for i, id_ in enumerate(self._ids)}

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, external_id) -> bool:
        return external_id in self._positions

    def position(self, external_id: str) -> int:
        return self._positions[external_id]

    def vector(self, external_id: str) -> np.ndarray:
        return self._vectors[self._positions[external_id]]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FlatIndex):
            return NotImplemented
        return (
            self._ids == other._ids
            and self._vectors.shape == other._vectors.shape
            and np.array_equal(self._vectors.view(np.uint32), other._vectors.view(np.uint32))
        )

    def __repr__(self) -> str:
        return f"FlatIndex(dim={self.dim}, count={len(self)})"


@dataclass(frozen=True, eq=False)
class SearchHitList:
    """Hits ordered by ascending squared distance."""

    ids: tuple[str, ...]
    distances: np.ndarray  # float64, shape (len(ids),)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SearchHitList):
            return NotImplemented
        return self.ids == other.ids and self.distances.tobytes() == other.distances.tobytes()

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return zip(self.ids, (float(d) for d in self.distances))

    @property
    def hits(self) -> list[tuple[str, float]]:
        return list(self)


def build_index(records: Iterable[tuple[str, object]], dim: int) -> FlatIndex:
    """Build an index from ``(external_id, vector)`` pairs, keeping input order."""
    if dim < 1:
        raise DimensionMismatch(f"dim must be positive, got {dim}")
    ids: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    for external_id, values in records:
        external_id = str(external_id)
        if external_id in seen:
            raise DuplicateId(f"duplicate id {external_id!r}")
        seen.add(external_id)
        try:
            rows.append(as_vector(values, dim))
        except DimensionMismatch as exc:
            raise DimensionMismatch(f"id {external_id!r}: {exc}") from None
        ids.append(external_id)
    if not ids:
        raise EmptyCollection("cannot build an index from zero records")
    return FlatIndex(ids, np.stack(rows))


def _check_k(index: FlatIndex, k: int, exclude_id) -> None:
    if k < 1:
        raise KTooLarge(f"k must be >= 1, got {k}")
    available = len(index) - (1 if exclude_id is not None and exclude_id in index else 0)
    if k > available:
        raise KTooLarge(f"k={k} exceeds the {available} searchable entries")


def _squared_distances(vectors64: np.ndarray, queries: np.ndarray) -> np.ndarray:
    # queries: (b, d) float32 -> (b, n) float64.  Row results do not depend on b.
    diff = vectors64[None, :, :] - queries.astype(np.float64)[:, None, :]
    return np.square(diff).sum(axis=-1)


def _select(index: FlatIndex, dist: np.ndarray, k: int, exclude_id) -> SearchHitList:
    if exclude_id is not None and exclude_id in index:
        dist = dist.copy()
        dist[index.position(exclude_id)] = np.inf
    order = np.argsort(dist, kind="stable")[:k]
    return SearchHitList(tuple(index.ids[i] for i in order), dist[order])


def search(index: FlatIndex, query, k: int, exclude_id: str | None = None) -> SearchHitList:
    """Return the ``k`` entries nearest to ``query``.

    ``exclude_id`` removes one entry (normally the query's own) from the
    candidate set.  Raises :class:`KTooLarge` rather than returning fewer
    than ``k`` hits.
    """
    q = as_vector(query, index.dim)
    _check_k(index, k, exclude_id)
    dist = _squared_distances(index._vectors64, q[None, :])[0]
    return _select(index, dist, k, exclude_id)


def batch_search(
    index: FlatIndex,
    queries,
    k: int,
    exclusions: Sequence[str | None] | None = None,
) -> list[SearchHitList]:
    """Search many queries; element ``i`` equals ``search(index, queries[i], ...)``."""
    queries = list(queries) if not isinstance(queries, np.ndarray) else queries
    n_queries = len(queries)
    if n_queries == 0:
        return []
    if exclusions is None:
        exclusions = [None] * n_queries
    elif len(exclusions) != n_queries:
        raise DimensionMismatch(
            f"{len(exclusions)} exclusions given for {n_queries} queries"
        )

    rows = []
    for pos in range(n_queries):
        try:
            rows.append(as_vector(queries[pos], index.dim))
            _check_k(index, k, exclusions[pos])
        except (DimensionMismatch, KTooLarge) as exc:
            raise type(exc)(f"query {pos}: {exc}") from None
    block = np.stack(rows)

    per_row = max(1, len(index) * index.dim * 8)
    step = max(1, _BLOCK_BYTES // per_row)
    results: list[SearchHitList] = []
    for start in range(0, n_queries, step):
        dist = _squared_distances(index._vectors64, block[start:start + step])
        for offset, row in enumerate(dist):
            results.append(_select(index, row, k, exclusions[start + offset]))
    return results


def save_index(index: FlatIndex, destination: str | os.PathLike) -> None:
    chunks = [MAGIC, struct.pack("<IQ", index.dim, len(index))]
    little = index.vectors.astype("<f4", copy=False)
    for external_id, row in zip(index.ids, little):
        raw = external_id.encode("utf-8")
        chunks.append(struct.pack("<Q", len(raw)))
        chunks.append(raw)
        chunks.append(row.tobytes())
    Path(destination).write_bytes(b"".join(chunks))


def load_index(source: str | os.PathLike) -> FlatIndex:
    data = Path(source).read_bytes()
    head = data[: len(MAGIC)]
    if head != MAGIC:
        if len(head) == len(MAGIC) and head.startswith(_MAGIC_STEM):
            raise VersionMismatch(f"unsupported index format version {head[5:]!r}")
        if len(head) < len(MAGIC) and MAGIC.startswith(head) and head:
            raise TruncatedFile("file ends inside the magic bytes")
        raise BadMagic(f"not an index file (magic {head!r})")

    offset = len(MAGIC)

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise TruncatedFile(f"expected {n} bytes at offset {offset}, file has {len(data)}")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    dim, count = struct.unpack("<IQ", take(12))
    if dim < 1:
        raise BadMagic(f"invalid dim {dim} in header")
    ids: list[str] = []
    vectors = np.empty((count, dim), dtype=np.float32)
    row_bytes = 4 * dim
    for i in range(count):
        (id_len,) = struct.unpack("<Q", take(8))
        ids.append(take(id_len).decode("utf-8"))
        vectors[i] = np.frombuffer(take(row_bytes), dtype="<f4")
    if offset != len(data):
        raise IndexFileError(f"{len(data) - offset} trailing bytes after {count} records")
    if count == 0:
        raise EmptyCollection("index file holds zero records")
    if len(set(ids)) != len(ids):
        raise DuplicateId("index file contains duplicate ids")
    return FlatIndex(ids, vectors)
