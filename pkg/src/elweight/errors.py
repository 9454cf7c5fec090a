"""Exception hierarchy shared by every module of the package."""


class ELWeightError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ELWeightError, ValueError):
    """Invalid user configuration (maps to CLI exit code 2)."""


class NumericalError(ELWeightError, ArithmeticError):
    """A numerical routine failed (maps to CLI exit code 3)."""


class DomainViolation(NumericalError):
    """An argument lies outside the domain of the function."""


class HullViolation(NumericalError):
    """Zero is not in the interior of the convex hull of the constraint rows."""


class SingularConstraints(NumericalError):
    """The sample covariance of the constraint rows is rank deficient."""


class NonConvergence(NumericalError):
    """An iterative solver hit its iteration cap above tolerance."""


class DegenerateSample(NumericalError):
    """The sample is too degenerate for the requested estimator."""


class PsiNonFinite(NumericalError):
    """A user-supplied functional returned non-finite values."""


class TooManyFailures(NumericalError):
    """Too many Monte Carlo repetitions failed to produce an estimate."""


class DimensionMismatch(ConfigError):
    """Array shapes are incompatible with the requested operation."""


class WeightMismatch(ConfigError):
    """Weights have the wrong length or are not a probability vector."""


class InvalidCorrelationMatrix(ConfigError):
    """A correlation matrix is not symmetric positive definite."""


class AsymmetricInput(ConfigError):
    """A matrix expected to be symmetric is not."""
