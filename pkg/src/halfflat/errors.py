"""Exception hierarchy shared across the package."""


class HalfFlatError(Exception):
    """Base class for all errors raised by this package."""


class FrameMismatch(HalfFlatError):
    """Forms built over different coframes were combined."""


class DegreeOverflow(HalfFlatError):
    """A wedge product was requested with total degree above six."""


class DegreeUnderflow(HalfFlatError):
    """Interior product of a 0-form was requested."""


class DegreeMismatch(HalfFlatError):
    """An operation requiring equal degrees got mismatched forms."""


class DegenerateMetric(HalfFlatError):
    """The metric is not positive definite."""


class DegenerateVolume(HalfFlatError):
    """A reference volume form vanishes."""


class DegenerateSymplectic(HalfFlatError):
    """omega^3 = 0, so the 2-form is not symplectic at this point."""


class NotProportional(HalfFlatError):
    """S^2 deviates from a multiple of the identity beyond tolerance."""


class NotStable(HalfFlatError):
    """The 3-form is not stable of complex type (quartic invariant >= 0)."""


class SingularSystem(HalfFlatError):
    """A linear system was too ill-conditioned to solve reliably."""


class ParseError(HalfFlatError):
    """Expression text does not conform to the grammar."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnsupportedModel(HalfFlatError):
    """The operation is not defined for this coframe model."""


class AdmissibilityFailure(HalfFlatError):
    """A profile violates one of the admissibility conditions."""

    def __init__(self, message, first_violation_t=None):
        super().__init__(message)
        self.first_violation_t = first_violation_t


class ValidationFailure(HalfFlatError):
    """A constructed structure failed pointwise validation."""

    def __init__(self, message, t=None, residual=None):
        super().__init__(message)
        self.t = t
        self.residual = residual


class PeriodicityViolation(HalfFlatError):
    """A torus coefficient function is not 1-periodic."""


class ODEStiffness(HalfFlatError):
    """The profile ODE integration failed before reaching t_max."""

    def __init__(self, message, last_valid_t=None):
        super().__init__(message)
        self.last_valid_t = last_valid_t
