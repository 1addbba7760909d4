"""
Exception hierarchy for face-graph-verifier.

Every content error subclasses :class:`ValueError` so callers that only care about
"bad input" can catch that; missing files raise the builtin :class:`FileNotFoundError`.
"""

from typing import Optional


class FaceVerifierError(Exception):
    """Base class for all errors raised by this package."""


class ImageFormatError(FaceVerifierError, ValueError):
    """The image file could not be interpreted as a supported image."""


class MalformedImageError(ImageFormatError):
    """The PGM header or pixel payload is malformed or truncated."""


class UnsupportedBitDepthError(ImageFormatError):
    """The PGM declares a maximum value that needs more than 8 bits per pixel."""


class ImageTooSmallError(ImageFormatError):
    """The image is too small to build a single scale-space octave."""


class KeypointFormatError(FaceVerifierError, ValueError):
    """A keypoint CSV file does not conform to the expected layout.

    Args:
        message (str):
            Description of the problem.

    Keyword Parameters:
        line_number (int):
            1-based line number of the offending row, if known.
    """

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class LandmarkError(FaceVerifierError, ValueError):
    """A landmark annotation is invalid."""


class LandmarkFormatError(LandmarkError):
    """A landmark annotation line cannot be parsed."""


class MissingRegionError(LandmarkError):
    """One or more of the four landmark regions is absent."""


class DuplicateRegionError(LandmarkError):
    """A landmark region is listed more than once."""


class LandmarkOutOfBoundsError(LandmarkError):
    """A landmark coordinate falls outside the image."""


class GraphMatchError(FaceVerifierError, ValueError):
    """Graph matching cannot be performed on the given graphs."""


class EmptyGraphError(GraphMatchError):
    """A graph with no nodes was passed where at least one node is required."""


class FusionError(FaceVerifierError, ValueError):
    """Evidence fusion failed."""


class TotalConflictError(FusionError):
    """Two mass functions are in total conflict (K = 1) and cannot be combined."""


class AllRegionsMissingError(FusionError):
    """No regional score is available to fuse."""


class EvaluationError(FaceVerifierError, ValueError):
    """The batch evaluation cannot proceed."""


class ManifestError(EvaluationError):
    """The dataset manifest is malformed or references unusable files."""


class InsufficientTrialsError(EvaluationError):
    """The trial set lacks genuine or impostor trials."""
