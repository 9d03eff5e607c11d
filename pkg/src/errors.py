"""
Errors Module

Exception hierarchy shared by the numerical modules and the command-line front-end.
Parameter-domain problems derive from ValueError so that callers treating bad
input generically keep working; the CLI maps them to exit code 2.
"""


class CvMdiError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CvMdiError, ValueError):
    """A parameter lies outside the domain of the operation (mu < 1, tau outside (0, 1], ...)."""


class UnphysicalAttackError(DomainError):
    """
    The attack parameters violate a bona-fide condition.

    Attributes:
        constraint (str): Name of the violated constraint
    """

    def __init__(self, message: str, constraint: str = ''):
        super().__init__(message)
        self.constraint = constraint


class InfeasibleNoiseError(DomainError):
    """The requested equivalent noise is below the pure-loss value."""


class ConfigError(CvMdiError, ValueError):
    """A configuration value is missing or cannot be converted."""


class DegenerateDetectionError(CvMdiError):
    """The Bell-detection theta matrix is singular."""


class InternalConsistencyError(CvMdiError):
    """A quantity that is guaranteed for physical inputs turned out invalid."""


class DataQualityError(CvMdiError):
    """Estimated moments cannot be turned into a physical state."""
