"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A computation is degenerate or numerically infeasible."""


class InsufficientDonorsError(NumericalError):
    """Too few eligible donors around a target point."""


class DegenerateFitError(NumericalError):
    """A local design is singular or has no degrees of freedom left."""


class OverlapViolationError(NumericalError):
    """Propensity values incompatible with the overlap requirement."""


class InputError(ValueError):
    """Malformed user-supplied data."""
