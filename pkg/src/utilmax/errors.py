"""Exception types shared across the solver modules."""


class UtilmaxError(Exception):
    """Base class for all library errors."""


class InputError(UtilmaxError):
    """Malformed or inconsistent user input (scenario files, parameters)."""


class DomainBoundError(UtilmaxError):
    """A scalar equation has no root because the target sits outside the
    reachable range (finite-endpoint utilities with budget c <= a * Q(Omega))."""


class NotDifferentiableError(UtilmaxError):
    """Requested derivative does not exist (conjugate of the linear family)."""


class StrictConcavityError(UtilmaxError):
    """Operation requires a strictly concave utility."""


class ArbitrageError(UtilmaxError):
    """The martingale polytope is empty, so the model admits arbitrage."""


class UnboundedObjectiveError(UtilmaxError):
    """The primal objective increases without bound along a ray.

    The offending ray is attached as the ``certificate`` attribute.
    """

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class CalibrationError(UtilmaxError):
    """A scenario calibration has no admissible solution."""


class UnsupportedAsymptoticsError(UtilmaxError):
    """A declared diagonal asymptotic form falls outside the known templates."""
