"""Exception hierarchy.

Validation problems (bad input data) derive from :class:`ValidationError`;
failures during a computation derive from :class:`ComputationError`, and
failed cross-checks from :class:`VerificationError`.  The CLI maps the three
families to exit codes 1, 2 and 3.
"""


class AbelTorsionError(Exception):
    """Base class for all package errors."""


class ValidationError(AbelTorsionError):
    pass


class DegenerateLattice(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class NotPositive(ValidationError):
    pass


class NonIntegralE(ValidationError):
    pass


class ComputationError(AbelTorsionError):
    pass


class NearZeroEigenvalue(ComputationError):
    """Raised when the Hermitian form has a kernel; use :mod:`abeltorsion.degenerate`."""


class NondegenerateInput(ComputationError):
    pass


class RankMismatch(ComputationError):
    pass


class SingularPairing(ComputationError):
    pass


class CutoffTooLarge(ComputationError):
    pass


class InsufficientCutoff(ComputationError):
    pass


class NotAmple(ComputationError):
    pass


class TrivialFlatFactor(ComputationError):
    pass


class TrivialBundle(ComputationError):
    pass


class SlowConvergence(ComputationError):
    pass


class DimensionUnsupported(ComputationError):
    pass


class ConvergenceFailure(ComputationError):
    pass


class VerificationError(AbelTorsionError):
    pass


class ChiMismatch(VerificationError):
    pass


class IdentityViolation(VerificationError):
    def __init__(self, message, lam=None, dims=None):
        super().__init__(message)
        self.lam = lam
        self.dims = dims
