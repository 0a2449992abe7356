"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid arguments: wrong shapes, out-of-range parameters, violated hypotheses."""


class DomainError(InputError):
    """A point lies outside the domain where a quantity is defined."""


class NumericalError(RuntimeError):
    """An iterative procedure failed to reach its tolerance."""

    def __init__(self, message, residual=None, **info):
        super().__init__(message)
        self.residual = residual
        self.info = info
