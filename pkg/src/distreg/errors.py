"""Exception types shared across the package."""


class DistregError(Exception):
    """Base class for package-specific failures."""


class DataError(DistregError):
    """Malformed, inconsistent, or degenerate input data."""


class NumericalError(DistregError):
    """A numerical procedure failed (non-finite objective, broken scale)."""


class CalibrationError(DistregError):
    """Conformal calibration cannot proceed (e.g. a zero modulation scale)."""
