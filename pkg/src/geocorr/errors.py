"""Exception hierarchy shared across the toolkit.

Each class carries the CLI exit code it maps to so command handlers can
translate failures without a lookup table.
"""


class GeocorrError(Exception):
    exit_code = 2


class FormatError(GeocorrError, ValueError):
    """A file or record does not follow the expected layout."""


class PreconditionError(GeocorrError, ValueError):
    """An input violates an operation's documented precondition."""


class DegeneratePatchError(GeocorrError, ValueError):
    """Too few points, or a rank-deficient covariance, for a plane fit."""

    exit_code = 3


class DegenerateConfigurationError(GeocorrError, ValueError):
    """Weighted correspondences do not determine a rigid transform."""

    exit_code = 3


class InsufficientMatchesError(GeocorrError):
    exit_code = 3


class UndefinedResidualError(GeocorrError):
    exit_code = 3


class UndefinedMetricError(GeocorrError):
    exit_code = 2


class PipelineError(GeocorrError):
    exit_code = 3


class ConfigError(GeocorrError, ValueError):
    exit_code = 1
