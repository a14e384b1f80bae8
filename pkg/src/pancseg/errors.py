"""Exception hierarchy shared by all pancseg modules."""


class PancsegError(Exception):
    """Base class for all pancseg errors."""


class FormatError(PancsegError):
    """File does not look like a supported format (bad magic or version)."""


class CorruptionError(PancsegError):
    """File header and payload disagree (truncation, length mismatch)."""


class ValidationError(PancsegError):
    """Input violates a documented precondition or invariant."""


class BoundsError(PancsegError):
    """Voxel index or cuboid falls outside the volume."""


class ConfigError(PancsegError):
    """Configuration values are inconsistent or out of range."""


class LocalizationError(PancsegError):
    """Bounding-box estimation cannot proceed (e.g. empty patch grid)."""
