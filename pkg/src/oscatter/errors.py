"""Exception hierarchy.

Configuration / input problems map to CLI exit code 2, numerical failures
to exit code 3 (see :mod:`oscatter.cli`).
"""


class OscatterError(Exception):
    """Base class for all library errors."""


class ConfigError(OscatterError):
    """Bad user input: parameters, config files, spans."""


class InvalidParameterError(ConfigError):
    pass


class InvalidSpanError(ConfigError):
    pass


class CapacityError(ConfigError):
    """Requested index exceeds a configured capacity limit."""


class DomainError(ConfigError):
    """Argument outside the mathematical domain of a formula."""


class NumericalError(OscatterError):
    """A numerical procedure failed or left its validity regime."""


class IntegrationFailureError(NumericalError):
    pass


class InconsistencyError(NumericalError):
    """Two redundant computation routes disagree beyond their bound."""


class NotAsymptoticError(NumericalError):
    """A profile or solution is not flat where an asymptotic value is read."""


class RangeError(NumericalError):
    """Evaluation outside the solved time span."""


class TruncatedSupportError(NumericalError):
    """Grid does not contain the wavefunction support to negligible tails."""


class GridTooSmallError(NumericalError):
    pass


class StepTooLargeError(NumericalError):
    pass


class LimitNotReachedError(NumericalError):
    """A quantity that should be time-independent still drifts."""
