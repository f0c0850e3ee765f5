"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3.
"""


class StcovError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(StcovError, ValueError):
    """Invalid user-supplied configuration (bad paths, flags, sizes)."""


class ModelDomainError(StcovError, ValueError):
    """Covariance model parameters or evaluation inputs outside their domain."""


class SingularModelError(StcovError, ArithmeticError):
    """A test-function denominator is zero for the given model and lag."""


class DegeneratePairError(StcovError, ArithmeticError):
    """A site pair has zero-variance series and no usable estimate."""

    def __init__(self, pair, message=None):
        self.pair = tuple(pair)
        super().__init__(message or f"degenerate site pair {self.pair}: zero-variance series")


class NotPSDError(StcovError, ArithmeticError):
    """A matrix required to be positive semidefinite is not, even after jitter.

    Attributes
    ----------
    most_negative_pivot : float
        The most negative pivot found by an LDL^T factorization of the
        offending matrix (diagnostic for how far from PSD it is).
    """

    def __init__(self, message, most_negative_pivot=float("nan")):
        self.most_negative_pivot = float(most_negative_pivot)
        super().__init__(f"{message} (most negative pivot {self.most_negative_pivot:.3e})")


NUMERICAL_ERRORS = (SingularModelError, DegeneratePairError, NotPSDError)
