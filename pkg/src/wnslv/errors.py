"""Exception hierarchy shared by every module."""


class WNSLVError(Exception):
    """Base class for all errors raised by the package."""

    code = "error"


class ParameterError(WNSLVError, ValueError):
    code = "parameter_error"


class DomainError(WNSLVError, ValueError):
    """A coordinate lies outside the domain of a variable change."""

    code = "domain_error"


class BoundaryError(DomainError):
    """Spot at or beyond the finite S-interval of the c > 0 case."""

    code = "boundary_error"


class TimeDomainError(WNSLVError, ValueError):
    code = "time_domain_error"


class OrderingError(WNSLVError, ValueError):
    code = "ordering_error"


class CoverageError(WNSLVError, ValueError):
    """Coefficient schedule does not cover the requested interval."""

    code = "coverage_error"


class IntegrabilityError(WNSLVError, ValueError):
    """Discriminant is not positive, so the kernel is not normalizable."""

    code = "integrability_error"


class DegenerateVarianceError(WNSLVError, ValueError):
    code = "degenerate_variance"


class NotTransformableError(WNSLVError, ValueError):
    code = "not_transformable"


class FormulaVerificationError(WNSLVError, RuntimeError):
    code = "formula_verification_failed"


class QuadratureError(WNSLVError, RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    code = "quadrature_error"

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class EmptyEnsembleError(WNSLVError, ValueError):
    code = "empty_ensemble"


class BelowIntrinsicError(WNSLVError, ValueError):
    code = "below_intrinsic"


class AboveBoundError(WNSLVError, ValueError):
    code = "above_bound"


class NoSolutionError(WNSLVError, RuntimeError):
    code = "no_solution"


class SpecError(WNSLVError, ValueError):
    """Invalid experiment or configuration file."""

    code = "invalid_spec"

    def __init__(self, message, code=None, **details):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.details = details
