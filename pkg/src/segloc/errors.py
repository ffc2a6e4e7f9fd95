"""Exception types shared across the package."""


class SeglocError(Exception):
    """Base class for all package-specific errors."""


class ParallelRaysError(SeglocError):
    """Two back-projection rays are (near-)parallel; triangulation is undefined."""


class WeakBaselineError(SeglocError):
    """The camera centres of an initialisation pair are too close together."""


class EmptyMaskError(SeglocError):
    """An operation that requires positive pixels received an empty mask."""


class AllZeroWeightsError(SeglocError):
    """Resampling was requested from a particle set whose weights sum to zero."""


class ImageTooSmallError(SeglocError):
    """Image is smaller than the operator's kernel."""


class PoseLogParseError(SeglocError):
    """A pose log line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class NonMonotonicFrameIdsError(SeglocError):
    """Pose log frame ids are not strictly increasing."""


class ConfigError(SeglocError):
    """Invalid configuration value; `field` holds the dotted path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FrameMismatchError(SeglocError):
    """A mask frame without a pose entry, or a pose entry without a mask."""
