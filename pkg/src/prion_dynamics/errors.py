"""Exception types raised by the solvers and the config layer."""


class PrionModelError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PrionModelError, ValueError):
    """A parameter or config field is invalid."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ParseError(PrionModelError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SubcriticalParameters(PrionModelError):
    """The disease equilibrium was requested but R <= 1."""


class NotDiseaseCase(PrionModelError):
    """An operation needs beta*omega == mu0**2."""


class ToleranceNotMet(PrionModelError):
    """The adaptive integrator could not meet the requested tolerance."""


class ConeViolation(PrionModelError):
    """An ODE state left the invariant cone K by more than the clamp tolerance."""


class NotConverged(PrionModelError):
    """A trajectory had not settled to its limit within tolerance."""


class CflViolation(PrionModelError):
    pass


class NegativeDensity(PrionModelError):
    pass


class OutOfBoundaryRegion(PrionModelError):
    """The point lies in the region fed by initial data, not boundary data."""


class NoiseDominated(PrionModelError):
    """Recovered density has too much negative mass to be trusted."""
