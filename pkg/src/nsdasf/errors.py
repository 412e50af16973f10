"""Exception hierarchy shared by all modules."""


class NSDASFError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(NSDASFError, ValueError):
    """Inconsistent dimensions, invalid parameters or malformed config."""


class UnsupportedConfigurationError(ConfigurationError):
    """A valid configuration that the requested operation does not handle."""


class DegenerateInputError(NSDASFError, ValueError):
    """Input for which the requested quantity is undefined (e.g. a zero matrix)."""


class NumericError(NSDASFError, ArithmeticError):
    """Non-finite values in inputs or results."""


class DivergenceError(NumericError):
    """The iterative solver produced non-finite iterates."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


class ProtocolError(NSDASFError):
    """Missing, duplicated or malformed messages between nodes."""


class StalenessError(ProtocolError):
    """Messages from different sample windows were mixed."""
