"""Exception types shared across the package."""


class TrapSpecError(Exception):
    """Base class for all package-specific errors."""


class DomainError(TrapSpecError, ValueError):
    """An argument is outside the physical domain of an operation."""


class ConfigurationError(TrapSpecError, ValueError):
    """A configuration is inconsistent or unsupported."""


class ResolutionError(ConfigurationError):
    """Requested resolution bandwidth cannot be realized from the data."""


class UndampedOscillatorError(DomainError):
    """Driven-response evaluation requires a strictly positive damping rate."""


class NumericalError(TrapSpecError, RuntimeError):
    """A numerical procedure failed (solver, fit, integration)."""


class NonUniqueSteadyStateError(NumericalError):
    """The Liouvillian null space has dimension > 1."""

    def __init__(self, nullity: int, message: str | None = None):
        self.nullity = nullity
        super().__init__(
            message
            or f"steady state is not unique: null space has dimension {nullity}"
        )


class NonIdentifiableError(NumericalError):
    """The fit Jacobian is singular along some parameter combination."""

    def __init__(self, combination: str, message: str | None = None):
        self.combination = combination
        super().__init__(
            message or f"non-identifiable parameter combination: {combination}"
        )
