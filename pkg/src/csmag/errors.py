"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A parameter combination that cannot be run (bad packing, bad grid, ...)."""


class ResourceError(RuntimeError):
    """The request would exceed an explicit memory or enumeration budget."""


class InfeasibleError(RuntimeError):
    """A constrained problem has no feasible point."""


class OracleFailureError(RuntimeError):
    """The exact LP oracle gave up (cycling guard or certificate check failed)."""


class PhaseRangeError(ValueError):
    """An estimated probability lies outside the invertible fringe |2p-1| <= v."""


class UnsupportedModelError(TypeError):
    """An operation was asked of a field model it is not defined for."""
