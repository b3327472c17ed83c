"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration, shape mismatch or infeasible plan."""


class NumericalError(ArithmeticError):
    """Non-finite values appeared where finite ones are required."""


class ProtocolError(RuntimeError):
    """A server-side protocol step was invoked in an illegal state."""
