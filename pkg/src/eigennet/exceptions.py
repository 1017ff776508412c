"""Exception types shared across the package."""


class EigenNetError(Exception):
    """Base class for package errors."""


class ValidationError(EigenNetError, ValueError):
    """Input data violates a documented invariant."""


class DimensionError(EigenNetError, ValueError):
    """Array shapes do not line up."""


class ContractError(EigenNetError, ValueError):
    """A precondition of an operation was violated (e.g. negative scales)."""


class ConfigError(EigenNetError, ValueError):
    """Invalid sampler, suite or cross-validation configuration."""
