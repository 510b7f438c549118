"""Exception types raised across the package."""


class ClockInkError(Exception):
    """Base class for all package errors."""


class DrawingFormatError(ClockInkError, ValueError):
    """A stroke or ground-truth file does not conform to the file format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDrawingError(ClockInkError, ValueError):
    pass


class DegenerateBearingError(ClockInkError, ValueError):
    pass


class FitError(ClockInkError, ValueError):
    """Ellipse fit impossible (too few or degenerate points)."""


class ClusteringError(ClockInkError, ValueError):
    pass


class TrainingError(ClockInkError, ValueError):
    pass


class ModelMismatchError(ClockInkError, ValueError):
    """Model and feature dimensions disagree."""
