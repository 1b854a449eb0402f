"""Exception hierarchy.

Input problems derive from :class:`ValidationError` (also a ``ValueError``);
numerical breakdowns derive from :class:`NumericalError`. The CLI maps the
first family to exit code 2 and the second to exit code 3.
"""


class BJSpecError(Exception):
    pass


class ValidationError(BJSpecError, ValueError):
    pass


class ShapeMismatch(ValidationError):
    pass


class NonHermitianDiagonal(ValidationError):
    def __init__(self, index, residual):
        self.index = index
        self.residual = residual
        super().__init__(f"V_{index} is not hermitian (|V - V*| = {residual:.3e})")


class SingularOffDiagonal(ValidationError):
    def __init__(self, index, sigma):
        self.index = index
        self.sigma = sigma
        super().__init__(
            f"T_{index} is numerically singular (smallest singular value {sigma:.3e})")


class IndexOutOfRange(ValidationError, IndexError):
    pass


class EndpointOnSpectrum(ValidationError):
    pass


class NumericalError(BJSpecError):
    pass


class EigensolveFailure(NumericalError):
    pass


class SolveFailure(NumericalError):
    pass


class MoebiusSingular(NumericalError):
    pass


class FrameDegenerate(NumericalError):
    pass


class RankIndeterminate(NumericalError):
    pass


class RefinementLimit(NumericalError):
    pass


class ConsistencyError(NumericalError):
    """Two routes that must agree did not."""


class NoConvergence(NumericalError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory if trajectory is not None else []


class QuadratureNotConverged(NumericalError):
    def __init__(self, message, error_bound=None):
        super().__init__(message)
        self.error_bound = error_bound


class TooManySingular(NumericalError):
    def __init__(self, skipped, samples):
        self.skipped = skipped
        self.samples = samples
        super().__init__(f"{skipped} of {samples} integrand evaluations were singular")
