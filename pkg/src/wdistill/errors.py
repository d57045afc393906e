"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's preconditions."""


class PreconditionError(InvalidArgumentError):
    """A state fed to an operation is not in the required form."""


class InvalidStateError(InvalidArgumentError):
    """A quantum state object is malformed (zero norm, wrong shape, ...)."""


class NumericalDomainError(ArithmeticError):
    """A matrix left the numerically valid domain (e.g. negative eigenvalue
    beyond tolerance, singular confusion matrix)."""


class ConfigError(ValueError):
    """A run configuration is inconsistent or incomplete."""


class DataError(ValueError):
    """Recorded protocol data violates its own invariants."""


class UnsupportedError(NotImplementedError):
    """A requested generalisation is out of scope."""
