from typing import Optional


class RkoRouteError(Exception):
    """Base class for every error raised by rko_route."""


class InstanceParseError(RkoRouteError, ValueError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class InstanceValidationError(RkoRouteError, ValueError):
    pass


class DomainError(RkoRouteError, ValueError):
    """Argument outside the domain of an operation (bad node, length, grid...)."""


class GeneratorError(RkoRouteError, RuntimeError):
    pass


class QuboSizeError(RkoRouteError, ValueError):
    def __init__(self, n_vars: int, cap: int, estimate: int):
        self.n_vars = n_vars
        self.cap = cap
        self.estimate = estimate
        super().__init__(
            f"QUBO would need {n_vars} variables (cap {cap}); "
            f"qubit estimate 2*n_seams^2*n_tools*n_config*n_position = {estimate}"
        )


class CapabilityError(RkoRouteError, RuntimeError):
    pass
