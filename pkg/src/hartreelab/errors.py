"""Exception types shared across the laboratory."""


class LabError(Exception):
    """Base class for all laboratory-specific failures."""


class GridError(LabError):
    """Grid construction or validation failed."""


class GridMismatchError(LabError):
    """Operands live on different grids."""


class InvalidFieldError(LabError):
    """Field data contains NaN/Inf or has the wrong shape."""


class KernelCacheError(LabError):
    """Kernel cache file is missing, corrupt, or inconsistent."""


class SpectralError(LabError):
    """Eigenpair solve failed to converge or to isolate the negative mode."""


class DecompositionError(LabError):
    """Modulation fit did not converge within the iteration budget."""


class ConstraintViolationError(LabError):
    """A state escaped the constraint set it was required to satisfy."""


class WindowError(LabError):
    """A time-window average was requested where the window is not covered."""


class NotClassifiableError(LabError):
    """State violates the classifier's energy precondition."""


class IntegrityError(LabError):
    """A conserved quantity drifted beyond the integrity threshold."""


class ConfigError(LabError):
    """Configuration value missing, malformed, or violating an ordering."""


class ParameterError(LabError):
    """Experiment parameters are mutually infeasible."""
