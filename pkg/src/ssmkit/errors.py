"""Exception types shared across the toolkit."""


class SsmkitError(Exception):
    """Base class for all toolkit errors."""


class OutOfDomainError(SsmkitError):
    """A natural-scale value lies outside its transform's domain."""

    def __init__(self, name, value, message=None):
        self.name = name
        self.value = value
        super().__init__(message or f"parameter {name!r}: value {value!r} outside transform domain")


class DivergenceError(SsmkitError):
    """A state, derivative or likelihood became non-finite."""


class StepUnderflowError(SsmkitError):
    """The integrator needed a step smaller than the configured minimum."""


class StepBudgetError(SsmkitError):
    """The integrator exceeded its step budget."""


class LengthMismatchError(SsmkitError):
    """A packed vector has the wrong length for the requested dimension."""


class SingularInnovationError(SsmkitError):
    """Innovation variance is not positive; the filter update is undefined."""


class BadWeightsError(SsmkitError):
    """Resampling weights are negative or do not sum to one."""


class DegenerateSimplexError(SsmkitError):
    """The initial simplex is degenerate or carries no usable objective values."""


class UnboundedDimensionError(SsmkitError):
    """A design dimension has an infinite transformed range."""


class NotEnoughSamplesError(SsmkitError):
    """Too few distinct samples to form an empirical proposal covariance."""


class ConfigError(SsmkitError):
    """A model declaration file is malformed or inconsistent."""
