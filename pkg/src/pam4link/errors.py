"""Exception types raised across the simulator."""


class LinkError(Exception):
    """Base class for all simulator errors."""


class GridError(LinkError, ValueError):
    """A frequency grid or sample grid does not fit the operation."""


class CalibrationError(LinkError):
    """A calibration search could not reach its target."""


class ClippingError(LinkError):
    """A probe or drive signal exceeded the available range."""


class SyncError(LinkError):
    """Symbol synchronization failed to find a significant correlation peak."""


class DivergenceError(LinkError):
    """LMS adaptation diverged."""


class AlignmentError(LinkError):
    """Decided bits could not be aligned to the reference sequence."""
