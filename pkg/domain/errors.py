"""Error hierarchy shared by the segmentation toolkit.

Every library error derives from :class:`SegmentationError`, itself a
``ValueError``, so callers (HTTP layer, CLI) can map all of them at once.
"""
from __future__ import annotations

from typing import Optional


class SegmentationError(ValueError):
    """Base class of all errors raised by the toolkit."""


class ChannelCountError(SegmentationError):
    """An operation received an image with an unsupported channel count."""

    def __init__(self, operation: str, expected: int, actual: int) -> None:
        super().__init__(
            f"{operation}: {expected} canal(aux) attendu(s), {actual} reçu(s)."
        )
        self.operation = operation
        self.expected = expected
        self.actual = actual


class DimensionMismatchError(SegmentationError):
    """Two inputs that must share a shape do not."""

    def __init__(self, operation: str, first: tuple, second: tuple) -> None:
        super().__init__(
            f"{operation}: dimensions incompatibles {first} et {second}."
        )
        self.operation = operation


class PreconditionError(SegmentationError):
    """An operation precondition does not hold."""


class UnknownLabelError(SegmentationError):
    """A label was requested that does not occur in the label map."""

    def __init__(self, label: int) -> None:
        super().__init__(f"Étiquette inconnue: {label}")
        self.label = label


class ConfigError(SegmentationError):
    """Malformed configuration file, unknown key or invalid value."""


class PlacementError(SegmentationError):
    """Synthetic shapes could not be placed within the retry budget."""


class StageError(SegmentationError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` holds the original error."""

    def __init__(self, stage: str, cause: Optional[BaseException] = None) -> None:
        detail = f": {cause}" if cause is not None else ""
        super().__init__(f"Échec de l'étape '{stage}'{detail}")
        self.stage = stage
        self.cause = cause


class ImageReadError(OSError):
    """An input image could not be read or decoded."""


class ImageWriteError(OSError):
    """An output file could not be written."""
