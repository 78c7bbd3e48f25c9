"""Exception types raised across the package."""


class CoherentRatchetError(Exception):
    """Base class for all package errors."""


class MissingParameter(CoherentRatchetError, ValueError):
    pass


class InvalidPartition(CoherentRatchetError, ValueError):
    pass


class InvalidBath(CoherentRatchetError, ValueError):
    pass


class GridError(CoherentRatchetError, ValueError):
    pass


class InvalidRate(CoherentRatchetError, ValueError):
    pass


class IntegrationFailure(CoherentRatchetError, RuntimeError):
    """Raised when a propagation produces non-finite values.

    Attributes
    ----------
    step : int
        Index of the first failing step.
    time : float
        Simulation time (fs) at which the failure was detected.
    """

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class GridTooShort(CoherentRatchetError, ValueError):
    pass


class DegenerateChain(CoherentRatchetError, ValueError):
    pass


class FitFailure(CoherentRatchetError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NotApplicable(CoherentRatchetError, ValueError):
    pass


class ConfigError(CoherentRatchetError, ValueError):
    """Configuration schema violation; ``path`` names the offending key."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
