"""Exception hierarchy shared by all modules."""


class HJHomogError(Exception):
    """Base class for package errors."""


class ConfigurationError(HJHomogError, ValueError):
    """Invalid grid, spec or parameter."""


class SpecRejected(ConfigurationError):
    """Hamiltonian outside the admissible class (sampled structure check failed)."""


class ResolutionError(ConfigurationError):
    """Grid too coarse for the requested fast scale."""

    def __init__(self, message, required_cells=None):
        super().__init__(message)
        self.required_cells = required_cells


class NumericalError(HJHomogError, ArithmeticError):
    """Base class for numerical failures."""


class DivergenceError(NumericalError):
    """Non-finite values appeared while marching."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NonConvergenceError(NumericalError):
    """Iteration cap reached before the residual tolerance was met."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class HullExitError(NumericalError):
    """A slope left the tabulated range of an effective Hamiltonian."""

    def __init__(self, message, slope=None):
        super().__init__(message)
        self.slope = slope
