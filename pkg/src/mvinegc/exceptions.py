"""Exception types raised across the package."""


class InputError(ValueError):
    """Invalid user input (lengths, missing values, preconditions)."""


class DomainError(ValueError):
    """Copula parameter outside the admissible domain of its family."""


class CapabilityError(TypeError):
    """Operation not supported by the given family or model."""


class NumericalError(ArithmeticError):
    """Iterative routine failed or a linear system was rank deficient."""
