"""Exception hierarchy used across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConfigurationError(ValueError):
    """A numerical configuration (grid, memory budget, level) is unusable."""


class RecoveryError(RuntimeError):
    """Recovery ran but its output failed validation."""


class ClusterGeometryError(RecoveryError):
    """Clusters violate the diameter or separation postconditions.

    Attributes
    ----------
    report : dict
        Offending clusters with their measured diameters and gaps.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class PrecisionError(RecoveryError):
    """The requested level cannot be evaluated reliably in double precision.

    Attributes
    ----------
    floor : float
        Estimated rounding floor of the field.
    limit : float
        Largest floor compatible with the threshold.
    level : float
        The level that was requested.
    """

    def __init__(self, message, floor=float("nan"), limit=float("nan"), level=float("nan")):
        super().__init__(message)
        self.floor = floor
        self.limit = limit
        self.level = level
