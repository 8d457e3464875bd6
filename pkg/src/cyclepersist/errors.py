"""Exception hierarchy.

Two broad classes matter for the CLI exit-code contract: HypothesisFailure
(the analyzed system violates a structural assumption -- exit 2) and
everything else under CyclePersistError (numerical/user failure -- exit 1).
"""


class CyclePersistError(Exception):
    """Base class for all package errors."""


class NumericsError(CyclePersistError):
    """A numerical procedure failed (divergence, non-convergence, blow-up)."""


class IntegrationError(NumericsError):
    """ODE integration failed; carries the last time reached."""

    def __init__(self, message, last_t=None):
        super().__init__(message)
        self.last_t = last_t


class NonFiniteFieldError(IntegrationError):
    """The vector field returned a non-finite value."""


class CycleSearchError(NumericsError):
    """Limit-cycle shooting failed (no return found, Newton divergence,
    degenerate section)."""


class HypothesisFailure(CyclePersistError):
    """A structural hypothesis of the analysis does not hold
    (non-simple trivial multiplier, identically vanishing bifurcation
    function, boundary field degenerate)."""


class DegenerateBoundaryError(HypothesisFailure):
    """Boundary vector field vanishes somewhere on the cycle; the degree
    is undefined.  Carries the offending parameter value."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class ExpressionError(CyclePersistError):
    """Expression parsing or evaluation error; carries the byte offset."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class ConfigError(CyclePersistError):
    """Bad or incomplete configuration file."""


class PointOnBoundaryError(CyclePersistError):
    """Membership query for a point lying on the cycle itself."""
