"""Exception types shared across the pipeline.

Each stage raises a narrow subclass of :class:`FedAlignError` so callers
(and the CLI's exit-code mapping) can distinguish configuration problems,
data problems, and runtime failures without string matching.
"""


class FedAlignError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FedAlignError):
    """Invalid or inconsistent configuration; message names the field."""


# --- dataset ingestion / partitioning ---------------------------------------

class DataError(FedAlignError):
    """Base for problems with input data."""


class MissingFile(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonBinaryLabel(DataError):
    pass


class AllMissingColumn(DataError):
    pass


class InsufficientFeatures(DataError):
    pass


class InsufficientRows(DataError):
    pass


class TooFewRows(DataError):
    pass


# --- serialization -----------------------------------------------------------

class UnserializableValue(FedAlignError):
    pass


class EmptyRecord(FedAlignError):
    pass


class ParseError(FedAlignError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


# --- encoders / embedding store ----------------------------------------------

class MissingEmbedding(FedAlignError):
    def __init__(self, record_ids):
        ids = list(record_ids)
        preview = ", ".join(ids[:5]) + ("..." if len(ids) > 5 else "")
        super().__init__(f"{len(ids)} record id(s) missing from store: {preview}")
        self.record_ids = ids


class DimensionMismatch(FedAlignError):
    pass


class StoreFormatError(FedAlignError):
    """Base for malformed embedding store files."""


class BadMagic(StoreFormatError):
    pass


class VersionUnsupported(StoreFormatError):
    pass


class TruncatedFile(StoreFormatError):
    pass


class DuplicateRecordId(StoreFormatError):
    pass


# --- models / training --------------------------------------------------------

class ShapeMismatch(FedAlignError):
    pass


class NonFiniteLoss(FedAlignError):
    pass


class EmptyTrainSet(FedAlignError):
    pass


# --- federation ---------------------------------------------------------------

class EmptyDeltaSet(FedAlignError):
    pass


class ConfigMismatch(FedAlignError):
    pass


# --- statistics -----------------------------------------------------------------

class DegenerateDifferences(FedAlignError):
    pass


class LengthMismatch(FedAlignError):
    pass
