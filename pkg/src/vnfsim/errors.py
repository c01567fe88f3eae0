"""Exception hierarchy shared across the package."""


class VnfSimError(Exception):
    """Base class for every error raised by vnfsim."""


class InfeasiblePlacementError(VnfSimError):
    pass


class DepartureUnderflowError(VnfSimError):
    pass


class InadmissibleActionError(VnfSimError):
    pass


class ScenarioTooLargeError(VnfSimError):
    pass


class NonConvergenceError(VnfSimError):
    pass


class StateNotFoundError(VnfSimError):
    pass


class ScenarioMismatchError(VnfSimError):
    """An artifact was produced for a different scenario than the one in use."""


class ConfigError(VnfSimError):
    pass


class TraceFormatError(VnfSimError):
    pass


class TraceMismatchError(VnfSimError):
    """Algorithms being compared did not see the same set of traces."""


class RoundingWarning(UserWarning):
    """A derived capacity or demand was not integral and had to be rounded."""
