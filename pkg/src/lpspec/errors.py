"""Exception types raised across the package."""


class LpSpecError(Exception):
    """Base class for all package errors."""


class DegenerateRegionError(LpSpecError, ValueError):
    """A region formula degenerates (p = 2 ray case, or p = 1 envelope)."""


class NotInRegionError(LpSpecError, ValueError):
    """A point lies outside the region an operation requires."""


class EmptyPreimageError(LpSpecError, ValueError):
    """Requested curvature value is not attained by the boundary profile."""


class CouplingError(LpSpecError, ValueError):
    """Cutoff depth too shallow for the requested quasimode accuracy."""


class QuadratureRangeError(LpSpecError, RuntimeError):
    """Integration range exceeds the configured grid."""


class ConvergenceError(LpSpecError, RuntimeError):
    """An iterative solver failed to converge."""


class IntegratorOverflowError(LpSpecError, FloatingPointError):
    """Fixed-step integration left the representable range."""


class BudgetExceededError(LpSpecError, ValueError):
    """Discretization would exceed the configured point budget."""


class ConfigError(LpSpecError, ValueError):
    """Invalid experiment configuration."""
