class RegulusError(Exception):
    """Base class of every error raised on purpose by regulus."""


class SystemValidationError(RegulusError):
    pass


class GuardrailError(RegulusError):
    pass


class InfeasibleError(RegulusError):
    pass


class PreconditionError(RegulusError):
    pass


class ConfigurationError(RegulusError):
    pass


class InternalError(RegulusError):
    """A hard postcondition or loop bound did not hold."""
