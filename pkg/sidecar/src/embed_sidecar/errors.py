"""Exception taxonomy for the sidecar.

Every error the CLI can exit on derives from :class:`SidecarError`; the CLI
maps subclasses to documented exit codes (see ``cli.py``).
"""

from __future__ import annotations


class SidecarError(Exception):
    """Base class for all sidecar failures."""


class ConfigError(SidecarError):
    """The sidecar configuration is malformed or violates a constraint."""


class MissingFile(SidecarError):
    """A required input file does not exist."""


class CorpusParseError(SidecarError):
    """A corpus line is not a valid serialized record.

    Carries the 1-based line number so operators can jump straight to the
    offending line.
    """

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class CheckpointUnavailable(SidecarError):
    """The requested model checkpoint could not be loaded."""


class WriteError(SidecarError):
    """The output store could not be written."""


class StoreFormatError(SidecarError):
    """An existing store file does not conform to the FEDEMB v1 layout."""
