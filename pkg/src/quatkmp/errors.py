"""Exception hierarchy shared by all modules."""


class QuatKmpError(Exception):
    """Base class for every error raised by this package."""


class DomainError(QuatKmpError, ValueError):
    """Input outside the domain of the log/exp maps (antipode, ||z|| >= pi)."""


class AlignmentError(QuatKmpError, ValueError):
    """Demonstrations cannot be placed in a common hemisphere."""


class FitError(QuatKmpError, RuntimeError):
    """EM failed: collapsed component, non-PD covariance or too little data."""


class ConditionError(QuatKmpError, RuntimeError):
    """GMR conditioning produced a non-finite result."""


class LayoutError(QuatKmpError, ValueError):
    """Kernel / block layout incompatible with the given inputs."""


class SolveError(QuatKmpError, RuntimeError):
    """The regularized Gram system is numerically singular."""


class DimError(QuatKmpError, ValueError):
    """Output dimensions of reference and desired points disagree."""


class LengthError(QuatKmpError, ValueError):
    """Trajectory too short for the requested computation."""
