"""Exception types raised across the package."""


class HetNetError(Exception):
    """Base class for all package errors."""


class ValidationError(HetNetError, ValueError):
    """A scenario parameter violates a model constraint."""


class PathLossTooSmall(ValidationError):
    pass


class NonPhysicalParameter(ValidationError):
    pass


class InfeasiblePowerControl(ValidationError):
    """Uplink power-control factor outside the region where mean interference is finite."""


class DomainError(HetNetError, ValueError):
    pass


class DegenerateAssociation(HetNetError, ValueError):
    """A zero association probability leaves the corresponding bias undefined."""


class InvalidAllocation(HetNetError, ValueError):
    pass


class EmptyEvaluationRegion(HetNetError, RuntimeError):
    """A sampled topology has no users (or no base stations) to measure."""


class UnknownParameterPath(HetNetError, KeyError):
    pass


class NoConvergence(RuntimeWarning):
    """No multi-start run met the gradient tolerance; the best iterate is returned."""
