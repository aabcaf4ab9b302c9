"""Exception hierarchy.

Every error raised by the package derives from :class:`RetrievalNetError`.
The ``exit_code`` attribute is what the CLI returns for that error family.
"""

from __future__ import annotations


class RetrievalNetError(Exception):
    exit_code = 1


# -- index -----------------------------------------------------------------

class VectorIndexError(RetrievalNetError):
    """Base class for vector index failures."""

    exit_code = 4


class DimensionMismatch(VectorIndexError):
    pass


class DuplicateId(VectorIndexError):
    pass


class EmptyCollection(VectorIndexError):
    pass


class KTooLarge(VectorIndexError):
    pass


class IndexFileError(VectorIndexError):
    pass


class BadMagic(IndexFileError):
    pass


class TruncatedFile(IndexFileError):
    pass


class VersionMismatch(IndexFileError):
    pass


# -- data ------------------------------------------------------------------

class DataError(RetrievalNetError):
    """Ingestion or dataset validation failure, optionally tied to a line."""

    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class DimInconsistent(DataError):
    pass


class DuplicateRecordId(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class EmptyClass(DataError):
    pass


# -- features / model ------------------------------------------------------

class ShapeError(RetrievalNetError):
    exit_code = 5


class TooFewRows(ShapeError):
    pass


class WidthMismatch(ShapeError):
    pass


class LengthMismatch(ShapeError):
    pass


class ZeroVector(ShapeError):
    pass


class EmptyTrainingSet(ShapeError):
    pass


class CheckpointError(ShapeError):
    pass


# -- metrics ---------------------------------------------------------------

class MetricError(RetrievalNetError):
    exit_code = 5


class EmptyInput(MetricError):
    pass


class EmptyQuerySet(EmptyInput):
    pass


class SingleClass(MetricError):
    pass


class NoRelevant(MetricError):
    pass


# -- pipeline --------------------------------------------------------------

class ConfigError(RetrievalNetError):
    exit_code = 2


class ArtifactError(RetrievalNetError):
    exit_code = 6


class ArtifactMismatch(ArtifactError):
    pass


class MissingArtifact(ArtifactError):
    pass


class StageError(RetrievalNetError):
    """Wraps an upstream error with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: RetrievalNetError):
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
