"""Exception hierarchy shared by all fairsplit modules."""

from __future__ import annotations


class FairsplitError(Exception):
    """Base class for every error raised by this package."""


class ManifestParseError(FairsplitError):
    """A manifest or split file row could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegrityError(FairsplitError):
    """Parsed data violates a uniqueness or membership invariant."""


class EmptyLabelError(FairsplitError, ValueError):
    """A plate label normalized to the empty string."""


class ImagingError(FairsplitError):
    """An image could not be loaded or canonicalized."""


class RectificationError(ImagingError):
    """A corner quad is too degenerate to define a homography."""


class DedupError(FairsplitError):
    pass


class SplitSpecError(FairsplitError):
    """A split specification is inconsistent with the dataset."""


class ConfigError(FairsplitError):
    """Synthesis or augmentation configuration is out of range."""


class TemplateError(FairsplitError):
    """A plate template is missing, malformed, or cannot render a label."""


class MetricsError(FairsplitError, ValueError):
    """Predictions and ground truth cannot be scored together."""


class RelGapUndefined(FairsplitError, ZeroDivisionError):
    """Relative gap requested against a baseline accuracy of 100%.

    The absolute gap is still available as ``gap``.
    """

    def __init__(self, gap: float) -> None:
        self.gap = gap
        super().__init__(f"relative gap undefined at 100% baseline accuracy (gap={gap:.4f})")
