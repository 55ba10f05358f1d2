"""Exception hierarchy shared across the toolkit."""


class CoevoError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CoevoError, ValueError):
    """Invalid parameters, malformed tables or configuration files."""


class DomainError(CoevoError, ValueError):
    """A function was evaluated outside the set where it is defined."""


class DegenerateThresholdError(DomainError):
    """The residual threshold mass of the remaining relays is exhausted."""


class UnreachableTargetError(DomainError):
    """The requested destination fraction can never be attained."""


class IntegrationError(CoevoError, ArithmeticError):
    """The integrator produced a state violating the simplex invariants."""


class NumericError(CoevoError, ArithmeticError):
    """A root-finding or optimization routine could not proceed."""
