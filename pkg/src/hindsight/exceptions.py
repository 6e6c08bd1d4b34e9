"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid hyperparameter, distribution or environment setting."""


class ShapeError(ValueError):
    """Array or network dimensions do not line up."""


class PreconditionError(ValueError):
    """An operation was called in a state where it is undefined."""


class NumericError(FloatingPointError):
    """A NaN or infinity appeared in a loss, gradient or parameter."""
