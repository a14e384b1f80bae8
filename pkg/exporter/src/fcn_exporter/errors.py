class ExporterError(Exception):
    """Base class for exporter failures."""


class ConfigError(ExporterError):
    """Invalid export configuration or shape mismatch."""


class FormatError(ExporterError):
    """Malformed VOLF1 input."""
