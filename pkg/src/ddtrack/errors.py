"""Exception types raised across the package."""


class DdtrackError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(DdtrackError, ValueError):
    """Array shapes or horizon lengths are inconsistent."""


class PersistentExcitationError(DdtrackError, ValueError):
    """Historical inputs are not informative enough (Hankel rank deficiency)."""


class InconsistentInitialConditionError(DdtrackError, ValueError):
    """The supplied recent window is not a trajectory of the data-described system."""


class DegenerateKernelError(DdtrackError, ValueError):
    """The past-input block has a trivial kernel, leaving no freedom to explain noise."""


class InfeasibleNoiseSetError(DdtrackError, ValueError):
    """No noise vector satisfies both the quadratic bound and data consistency."""


class CostDefinitenessError(DdtrackError, ValueError):
    """The input-side cost curvature matrix is singular; synthesis needs it invertible."""


class ConditioningError(DdtrackError, RuntimeError):
    """A matrix that must have full row rank is numerically rank deficient."""


class SolverBackendError(DdtrackError, RuntimeError):
    """Unknown or unavailable conic solver backend."""


class ExperimentStageError(DdtrackError, RuntimeError):
    """Failure inside one named stage of an experiment pipeline."""

    def __init__(self, stage: str, message: str = ""):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed" + (f": {message}" if message else ""))
