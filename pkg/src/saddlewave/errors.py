"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class DimensionMismatch(ValueError):
    """A point or array does not match the landscape / grid dimension."""


class GridTooLarge(ValueError):
    """Requested grid exceeds the configured point cap."""


class NumericalInstability(ArithmeticError):
    """Non-finite values or an unstable integrator (CLI exit code 3)."""


class HessianUnavailable(RuntimeError):
    """The landscape provides no Hessian and the caller asked for one."""
