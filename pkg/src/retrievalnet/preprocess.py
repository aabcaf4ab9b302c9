"""Feature construction: standard scaling, cosine scores, retrieval distances."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_model import EmbeddingRecord
from .errors import TooFewRows, WidthMismatch, ZeroVector
from .vector_index import FlatIndex, batch_search, search


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray
    epsilon: float = 1e-8

    @property
    def width(self) -> int:
        return self.mean.shape[0]

    def to_json(self) -> dict:
        return {
            "mean": [float(x) for x in self.mean],
            "std": [float(x) for x in self.std],
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScalerParams":
        return cls(
            np.asarray(obj["mean"], dtype=np.float64),
            np.asarray(obj["std"], dtype=np.float64),
            float(obj["epsilon"]),
        )


def _as_matrix(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.ndim != 2:
        raise WidthMismatch(f"expected a 2-D feature matrix, got shape {rows.shape}")
    return rows


def fit_scaler(rows, epsilon: float = 1e-8) -> ScalerParams:
    """Per-column mean and population standard deviation."""
    rows = _as_matrix(rows)
    if rows.shape[0] < 2:
        raise TooFewRows(f"need at least 2 rows to fit a scaler, got {rows.shape[0]}")
    return ScalerParams(rows.mean(axis=0), rows.std(axis=0), epsilon)


def transform(params: ScalerParams, rows) -> np.ndarray:
    rows = _as_matrix(rows)
    if rows.shape[1] != params.width:
        raise WidthMismatch(f"scaler fitted on {params.width} columns, got {rows.shape[1]}")
    return (rows - params.mean) / np.maximum(params.std, params.epsilon)


def inverse_transform(params: ScalerParams, rows) -> np.ndarray:
    rows = _as_matrix(rows)
    if rows.shape[1] != params.width:
        raise WidthMismatch(f"scaler fitted on {params.width} columns, got {rows.shape[1]}")
    return rows * np.maximum(params.std, params.epsilon) + params.mean


def fit_transform(rows, epsilon: float = 1e-8) -> tuple[ScalerParams, np.ndarray]:
    params = fit_scaler(rows, epsilon)
    return params, transform(params, rows)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise WidthMismatch(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class RetrievalFeatures:
    """Ascending squared-L2 distances to the k nearest indexed articles."""

    distances: np.ndarray
    neighbor_ids: tuple[str, ...]
    cosines: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.distances.shape[0]

    def as_row(self) -> np.ndarray:
        if self.cosines is None:
            return self.distances
        return np.concatenate([self.distances, self.cosines])


def _features_from_hits(index: FlatIndex, vector: np.ndarray, hits, include_cosines: bool):
    cosines = None
    if include_cosines:
        cosines = np.array([cosine_similarity(vector, index.vector(i)) for i in hits.ids])
    return RetrievalFeatures(hits.distances.copy(), hits.ids, cosines)


def extract_retrieval_features(
    index: FlatIndex,
    record: EmbeddingRecord,
    k: int,
    include_cosines: bool = False,
) -> RetrievalFeatures:
    """Distances from ``record`` to its k nearest indexed articles.

    The record's own id is always excluded so an indexed article never
    sees itself at distance zero.
    """
    hits = search(index, record.vector, k, exclude_id=record.article_id)
    return _features_from_hits(index, record.vector, hits, include_cosines)


def extract_feature_matrix(
    index: FlatIndex,
    records: Sequence[EmbeddingRecord],
    k: int,
    include_cosines: bool = False,
) -> np.ndarray:
    """Stack :func:`extract_retrieval_features` rows for many records."""
    records = list(records)
    hit_lists = batch_search(
        index,
        [r.vector for r in records],
        k,
        exclusions=[r.article_id for r in records],
    )
    width = 2 * k if include_cosines else k
    out = np.empty((len(records), width))
    for row, (rec, hits) in enumerate(zip(records, hit_lists)):
        out[row] = _features_from_hits(index, rec.vector, hits, include_cosines).as_row()
    return out


def write_feature_csv(
    destination: str | os.PathLike,
    features: np.ndarray,
    labels: Sequence[int],
    k: int,
    include_cosines: bool = False,
) -> None:
    header = [f"d{i + 1}" for i in range(k)]
    if include_cosines:
        header += [f"c{i + 1}" for i in range(k)]
    header.append("label")
    if features.shape[1] != len(header) - 1:
        raise WidthMismatch(f"{features.shape[1]} feature columns for header {header}")
    with open(destination, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, label in zip(features, labels):
            writer.writerow([repr(float(x)) for x in row] + [int(label)])
