"""Exception and warning types raised across the package."""


class RespiradarError(Exception):
    """Base class for all package errors."""


class OverlappingVirtualElements(RespiradarError):
    pass


class TargetOutOfUnambiguousRange(RespiradarError):
    pass


class GridMismatch(RespiradarError):
    pass


class ClutterAlreadyRemoved(RespiradarError):
    pass


class AllZeroImage(RespiradarError):
    pass


class DegenerateWindow(RespiradarError):
    """Windowed velocity energy is too small to normalize the autocorrelation."""


class NoPeak(RespiradarError):
    """Tapered autocorrelation is non-positive over the whole lag band."""


class EmptyRegion(RespiradarError):
    pass


class NoOverlap(RespiradarError):
    pass


class DegenerateVariance(RespiradarError):
    pass


class CorruptFile(RespiradarError):
    pass


class ConfigError(RespiradarError):
    pass


class PhaseUndefined(UserWarning):
    """Emitted when an image sample has exactly zero magnitude."""
