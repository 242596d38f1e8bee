"""Exception hierarchy shared by all modules."""


class ConsensusError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(ConsensusError, ValueError):
    """A tuning parameter or size argument is outside its domain."""


class ConstraintViolationError(ConsensusError, ValueError):
    """A stability inequality on the tuning parameters does not hold."""


class NumericDomainError(ConsensusError, ArithmeticError):
    """A state or input became NaN or infinite."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EmptyInputError(ConsensusError, ValueError):
    pass


class ConfigurationError(ConsensusError, ValueError):
    """Simulation configuration is internally inconsistent."""


class ScenarioError(ConsensusError, ValueError):
    """Scenario or sweep file could not be parsed into a valid config.

    ``location`` holds a dotted field path and/or a line number.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class StatsUndefinedError(ConsensusError):
    """No reached metric values were available to summarise."""
