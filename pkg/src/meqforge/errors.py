"""Exception hierarchy shared by all modules."""


class MeqforgeError(Exception):
    """Base class for all errors raised by meqforge."""


class DimensionError(MeqforgeError, ValueError):
    """Operator or space dimensions are inconsistent."""


class ValidationError(MeqforgeError, ValueError):
    """An input violates a documented precondition (e.g. not Hermitian)."""


class DomainError(MeqforgeError, ValueError):
    """A function was evaluated outside its domain (e.g. at a pole)."""


class ConsistencyError(MeqforgeError):
    """Internal bookkeeping does not add up (e.g. a frequency with no cluster)."""


class NumericalError(MeqforgeError, ArithmeticError):
    """A numerical routine produced non-finite values or failed to converge."""


class ConvergenceError(NumericalError):
    """A solver did not reach the requested residual."""

    def __init__(self, message, residuals=None, null_dim=None):
        super().__init__(message)
        self.residuals = residuals or {}
        self.null_dim = null_dim


class SymmetryError(MeqforgeError):
    """The supplied operator is not a weak symmetry of the generator."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(MeqforgeError, ValueError):
    """A configuration file violates the schema. ``path`` locates the field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
