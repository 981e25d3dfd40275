"""Exception hierarchy for tetherpoc."""


class TetherPocError(ValueError):
    """Base class for all errors raised by this package."""


class DegenerateEncounter(TetherPocError):
    """Relative velocity is zero or the two velocities are parallel."""


class DegenerateOrbit(TetherPocError):
    """Position and velocity of the main body are parallel (no orbital plane)."""


class NonSymmetric(TetherPocError):
    """A covariance matrix is not symmetric within tolerance."""


class IllConditionedCovariance(TetherPocError):
    """Covariance is singular, indefinite or has condition number above 1e12."""


class EmptyChain(TetherPocError):
    pass


class LengthBudgetExceeded(TetherPocError):
    """Sum of bar lengths exceeds the tether length."""


class FeasibleSampleNotFound(TetherPocError):
    """Rejection sampling of a planar-feasible chain gave up."""


class MissingOrientation(TetherPocError):
    """An estimator needs u_radial or q_planar and the event has none."""


class SchemaViolation(TetherPocError):
    """Event file has missing, extra or malformed fields."""


class UnitViolation(TetherPocError):
    """A length or radius field is out of its physical range."""
