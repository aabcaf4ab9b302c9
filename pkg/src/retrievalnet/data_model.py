"""Datasets of labelled article embeddings.

Records come from JSONL exports (one object per line)::

    {"id": "a1", "label": 1, "model": "roberta", "vector": [0.1, ...], "text": "..."}

``label`` is 1 for real news and 0 for fake.  ``synthesize`` produces a
seeded stand-in with the same shape.  All randomness uses numpy's PCG64
bit generator (``numpy.random.default_rng``), which yields identical
streams on every platform for a given seed.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    DataError,
    DimInconsistent,
    DuplicateRecordId,
    EmptyClass,
    LabelOutOfRange,
    NonFiniteValue,
    ParseError,
)

MODEL_TAGS = ("bert", "roberta", "gpt2", "distilbert", "synthetic")
FAKE, REAL = 0, 1


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    article_id: str
    label: int
    model_tag: str
    vector: np.ndarray
    text: str | None = None

    def __post_init__(self):
        if self.label not in (FAKE, REAL):
            raise LabelOutOfRange(f"label must be 0 or 1, got {self.label!r}")
        if self.model_tag not in MODEL_TAGS:
            raise DataError(f"unknown model tag {self.model_tag!r}; expected one of {MODEL_TAGS}")
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise DimInconsistent(f"vector must be a non-empty 1-D array, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise NonFiniteValue(f"record {self.article_id!r} has non-finite coordinates")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            (self.article_id, self.label, self.model_tag, self.text)
            == (other.article_id, other.label, other.model_tag, other.text)
            and np.array_equal(self.vector, other.vector)
        )

    def to_json(self) -> dict:
        out = {
            "id": self.article_id,
            "label": self.label,
            "model": self.model_tag,
            "vector": [float(x) for x in self.vector],
        }
        if self.text is not None:
            out["text"] = self.text
        return out


@dataclass(frozen=True)
class Dataset:
    """An immutable, id-unique collection of same-dimension records.

    Records may carry several model tags (one export can hold embeddings
    from several encoders); use :meth:`for_model` to get a single-tag view.
    """

    records: tuple[EmbeddingRecord, ...]
    dim: int
    _by_id: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        by_id = {}
        for rec in records:
            if rec.dim != self.dim:
                raise DimInconsistent(f"record {rec.article_id!r} has dim {rec.dim}, expected {self.dim}")
            if rec.article_id in by_id:
                raise DuplicateRecordId(f"duplicate article id {rec.article_id!r}")
            by_id[rec.article_id] = rec
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        return iter(self.records)

    def __getitem__(self, article_id: str) -> EmbeddingRecord:
        return self._by_id[article_id]

    def __contains__(self, article_id) -> bool:
        return article_id in self._by_id

    @property
    def ids(self) -> list[str]:
        return [r.article_id for r in self.records]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def vectors(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, self.dim))
        return np.stack([r.vector for r in self.records])

    @property
    def model_tags(self) -> list[str]:
        return sorted({r.model_tag for r in self.records})

    def real(self) -> "Dataset":
        return self.where(lambda r: r.label == REAL)

    def fake(self) -> "Dataset":
        return self.where(lambda r: r.label == FAKE)

    def for_model(self, tag: str) -> "Dataset":
        return self.where(lambda r: r.model_tag == tag)

    def where(self, predicate) -> "Dataset":
        return Dataset(tuple(r for r in self.records if predicate(r)), self.dim)

    def summary(self) -> dict:
        """Counts in the Total/Fake/Real layout, overall and per model tag."""
        per_tag = {}
        for tag in self.model_tags:
            counts = Counter(r.label for r in self.records if r.model_tag == tag)
            per_tag[tag] = {
                "total": counts[FAKE] + counts[REAL],
                "fake": counts[FAKE],
                "real": counts[REAL],
            }
        counts = Counter(r.label for r in self.records)
        return {
            "total": len(self.records),
            "fake": counts[FAKE],
            "real": counts[REAL],
            "dim": self.dim,
            "models": per_tag,
        }


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def _parse_record(line_no: int, raw: str) -> EmbeddingRecord:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line_no)
    for key in ("id", "label", "model", "vector"):
        if key not in obj:
            raise ParseError(f"missing key {key!r}", line_no)

    article_id, label, tag, vector = obj["id"], obj["label"], obj["model"], obj["vector"]
    text = obj.get("text")
    if not isinstance(article_id, str) or not article_id:
        raise ParseError("'id' must be a non-empty string", line_no)
    if isinstance(label, bool) or not isinstance(label, int):
        raise ParseError(f"'label' must be an integer, got {label!r}", line_no)
    if label not in (FAKE, REAL):
        raise LabelOutOfRange(f"label must be 0 or 1, got {label}", line_no)
    if tag not in MODEL_TAGS:
        raise ParseError(f"unknown model tag {tag!r}", line_no)
    if text is not None and not isinstance(text, str):
        raise ParseError("'text' must be a string", line_no)
    if not isinstance(vector, list) or not vector:
        raise ParseError("'vector' must be a non-empty array", line_no)
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in vector):
        raise ParseError("'vector' must contain only numbers", line_no)
    # json accepts NaN/Infinity literals; reject them here.
    if not all(math.isfinite(x) for x in vector):
        raise NonFiniteValue("vector contains NaN or infinity", line_no)
    return EmbeddingRecord(article_id, label, tag, np.asarray(vector, dtype=np.float64), text)


def iter_jsonl(lines: Iterable[str]) -> Iterator[tuple[int, EmbeddingRecord]]:
    for line_no, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        yield line_no, _parse_record(line_no, raw)


def load_jsonl(source: str | os.PathLike) -> Dataset:
    """Read and validate a JSONL export.

    Blank lines are skipped; every other line either yields a record or
    raises a :class:`DataError` carrying its 1-based line number.
    """
    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    dim = None
    with open(source, encoding="utf-8") as fh:
        for line_no, rec in iter_jsonl(fh):
            if dim is None:
                dim = rec.dim
            elif rec.dim != dim:
                raise DimInconsistent(f"vector has length {rec.dim}, expected {dim}", line_no)
            if rec.article_id in seen:
                raise DuplicateRecordId(f"duplicate id {rec.article_id!r}", line_no)
            seen.add(rec.article_id)
            records.append(rec)
    if dim is None:
        raise DataError(f"{source}: no records")
    return Dataset(tuple(records), dim)


def write_jsonl(dataset: Dataset, destination: str | os.PathLike) -> None:
    with open(destination, "w", encoding="utf-8") as fh:
        for rec in dataset:
            fh.write(json.dumps(rec.to_json()) + "\n")


def synthesize(seed: int, n_real: int, n_fake: int, dim: int, separation: float) -> Dataset:
    """Two isotropic unit-variance Gaussian classes.

    Real vectors are centred at ``+separation * u`` and fake vectors at
    ``-separation * u`` where ``u`` is the unit all-ones direction, so the
    class centroids sit ``2 * separation`` apart.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if n_real < 0 or n_fake < 0 or n_real + n_fake < 2:
        raise ValueError("need n_real + n_fake >= 2 with non-negative counts")
    if separation < 0:
        raise ValueError("separation must be non-negative")

    rng = np.random.default_rng(seed)
    u = np.ones(dim) / math.sqrt(dim)
    real = rng.standard_normal((n_real, dim)) + separation * u
    fake = rng.standard_normal((n_fake, dim)) - separation * u
    width = len(str(max(n_real, n_fake, 1) - 1))
    records = [
        EmbeddingRecord(f"real-{i:0{width}d}", REAL, "synthetic", real[i]) for i in range(n_real)
    ] + [
        EmbeddingRecord(f"fake-{i:0{width}d}", FAKE, "synthetic", fake[i]) for i in range(n_fake)
    ]
    return Dataset(tuple(records), dim)


def _train_count(n: int, fraction: float) -> int:
    # Round half up; keeps each class within one record of the target share.
    return int(math.floor(n * fraction + 0.5))


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition into (train, test).  Both halves keep the input record order."""
    rng = np.random.default_rng(spec.seed)
    n = len(dataset)
    in_train = np.zeros(n, dtype=bool)
    if spec.stratified:
        labels = dataset.labels
        for label in (FAKE, REAL):
            members = np.flatnonzero(labels == label)
            if members.size == 0:
                name = "fake" if label == FAKE else "real"
                raise EmptyClass(f"stratified split needs at least one {name} record")
            chosen = rng.permutation(members)[: _train_count(members.size, spec.train_fraction)]
            in_train[chosen] = True
    else:
        chosen = rng.permutation(n)[: _train_count(n, spec.train_fraction)]
        in_train[chosen] = True
    train = tuple(r for r, keep in zip(dataset.records, in_train) if keep)
    test = tuple(r for r, keep in zip(dataset.records, in_train) if not keep)
    return Dataset(train, dataset.dim), Dataset(test, dataset.dim)
