"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a formula is defined."""


class WeightOverflowError(OverflowError):
    """The Gaussian velocity weight overflows double precision."""


class StepError(RuntimeError):
    """A time step could not be taken (stability bound or non-finite state)."""

    def __init__(self, message, required_dt=None, location=None):
        super().__init__(message)
        self.required_dt = required_dt
        self.location = location


class IntegrationError(RuntimeError):
    """Characteristic integration produced a non-finite state."""

    def __init__(self, message, last_valid_s):
        super().__init__(message)
        self.last_valid_s = last_valid_s


class ConfigError(ValueError):
    """Invalid run configuration; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SeriesFormatError(ValueError):
    """Malformed time-series CSV."""
