"""Exception types shared across the package."""


class PamsError(Exception):
    """Base class for all solver and harness errors."""


class ZeroActivation(PamsError):
    """An activation pattern with no active antenna was used for a gain."""


class DomainError(PamsError, ValueError):
    pass


class NoConvergence(PamsError):
    pass


class ConfigMismatch(PamsError, ValueError):
    """Activation set inconsistent with the requested scheme configuration."""


class DegenerateUplink(PamsError):
    """No uplink time was allocated, so there is no NOMA view to build."""


class BudgetExceeded(PamsError):
    """Exhaustive enumeration would exceed the allowed problem size."""


class ConfigError(PamsError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
