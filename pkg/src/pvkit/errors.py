"""Exception types raised by the analysis modules."""


class PvkitError(Exception):
    """Base class for all toolkit errors."""


class MalformedContainer(PvkitError):
    """Input file structure is corrupt (bad RIFF chunks, truncated stream, bad cache header)."""


class UnsupportedEncoding(PvkitError):
    """File is well-formed but uses a codec or layout we do not decode."""


class InconsistentDimensions(PvkitError):
    """Frames in one sequence do not share width/height."""


class EmptySequence(PvkitError):
    """A frame or histogram sequence has no (or too few) entries."""


class ClipTooShort(PvkitError):
    """Audio clip has fewer samples than one analysis window."""


class InsufficientSamples(PvkitError):
    """A covariance estimate was requested from too few feature frames."""


class SingularCovariance(PvkitError):
    """Covariance log-determinant is undefined even after regularization."""


class UnsortedBoundaries(PvkitError):
    """Boundary list is not strictly increasing in time."""


class BinMismatch(PvkitError):
    """Two histograms have different bin counts."""


class SeriesTooShort(PvkitError):
    """Histogram series does not span the required analysis windows."""


class EmptySegment(PvkitError):
    """A segment contains no frames of the series it indexes into."""


class MalformedLine(PvkitError):
    """A transcript row could not be parsed."""


class NonMonotonicTimestamps(PvkitError):
    """Transcript rows are not ordered by start time."""


class ScaleOutOfRange(PvkitError):
    """frames_per_pixel outside the supported zoom range."""


class IoFailure(PvkitError):
    """Failed to write an output artifact."""


class MissingInput(PvkitError):
    """A pipeline stage requires an input or a prior stage's output that is absent."""
