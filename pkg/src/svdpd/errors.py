"""Exception hierarchy."""


class SvdpdError(Exception):
    """Base class for all package errors."""


class ParameterError(SvdpdError, ValueError):
    """An argument or configuration value is out of its allowed range."""


class IntegrationError(SvdpdError, ArithmeticError):
    """A step produced non-finite values or an implicit solve failed."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class SingularConfigurationError(IntegrationError):
    """Two particles coincide, so the pair direction is undefined."""

    def __init__(self, i, j, step=None):
        super().__init__(f"particles {i} and {j} coincide (r = 0)", step)
        self.pair = (i, j)


class UnsupportedModelError(SvdpdError, TypeError):
    """The chosen scheme needs a model property the model lacks."""
