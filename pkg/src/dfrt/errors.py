"""Exception hierarchy shared by all dfrt modules."""


class DFRTError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(DFRTError, ValueError):
    """Invalid construction parameters or configuration file content."""


class ModeIndexError(DFRTError, IndexError):
    """Angular-momentum indices outside their admissible range."""


class UnsupportedOrderError(DFRTError, ValueError):
    """Requested order exceeds what the evaluator supports."""


class DomainError(DFRTError, ValueError):
    """Evaluation point lies outside the ball."""


class DimensionError(DFRTError, ValueError):
    """Mismatched mode sets, grids or array shapes."""


class FeasibilityError(DFRTError, ValueError):
    """Constraint value outside the admissible interval."""


class InsufficientDataError(DFRTError, ValueError):
    """Too few usable samples for the requested estimate."""


class NormalizationError(DFRTError, ValueError):
    """Distribution does not sum to one."""


class NumericalFailure(DFRTError, RuntimeError):
    """Non-finite state encountered during a computation."""
