"""Exception hierarchy shared across the package."""


class OnlineFWError(Exception):
    """Base class for all errors raised by onlinefw."""


class ParameterError(OnlineFWError, ValueError):
    pass


class ShapeError(OnlineFWError, ValueError):
    pass


class NumericError(OnlineFWError, ArithmeticError):
    pass


class ConfigurationError(OnlineFWError, ValueError):
    pass


class UnsupportedDomainError(OnlineFWError, TypeError):
    pass


class InfeasibleDomainError(OnlineFWError, ValueError):
    pass


class ContractViolation(OnlineFWError, ValueError):
    """A caller-declared constant (e.g. a Lipschitz bound) was violated."""


class InputError(OnlineFWError, ValueError):
    pass


class ParseError(InputError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ConvergenceWarning(UserWarning):
    """Power iteration stopped at max_iters; the last iterate is still returned."""
