"""Exception and warning classes raised across pyconcord."""


class PyConcordError(Exception):
    """Base class for all pyconcord errors."""


class DegenerateColumn(PyConcordError, ValueError):
    """A data column has zero dispersion under the requested scaling."""

    def __init__(self, column, scale_mode="std_dev"):
        self.column = column
        super().__init__(f"column {column} has zero dispersion under scale_mode={scale_mode!r}")


class NonPositiveDiagonal(PyConcordError, ValueError):
    """A precision estimate has a diagonal entry <= 0."""


class ZeroDiagonalCovariance(PyConcordError, ValueError):
    """The sample covariance has s_ii <= 0 for some variable."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"sample covariance diagonal entry {index} is not strictly positive")


class DegenerateResidual(PyConcordError, ArithmeticError):
    """A regression residual vanished, so the conditional variance is undefined."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"residual of variable {index} has zero norm")


class ZeroRSS(DegenerateResidual):
    """A node-wise residual sum of squares is zero, so BIC is undefined."""


class FoldTooSmall(PyConcordError, ValueError):
    """Cross-validation folds are empty or leave too little training data."""


class InfeasibleTarget(PyConcordError, ValueError):
    """The requested condition number cannot be reached."""


class NotPositiveDefinite(PyConcordError, ValueError):
    """A matrix required to be positive definite is not."""


class InvalidDf(PyConcordError, ValueError):
    """Multivariate-t degrees of freedom must exceed 2."""


class DegenerateBudgetDenominator(PyConcordError, ArithmeticError):
    """1' Omega 1 is too small to normalise minimum-variance weights."""


class ZeroRisk(PyConcordError, ArithmeticError):
    """Realized risk is zero, so the Sharpe ratio is undefined."""


class WindowEstimationFailed(PyConcordError, RuntimeError):
    """Precision estimation failed for a rebalancing window."""

    def __init__(self, period, cause=None):
        self.period = period
        self.cause = cause
        msg = f"estimation failed for investment period {period}"
        if cause is not None:
            msg += f": {cause}"
        super().__init__(msg)


class NonPositiveDefiniteFallback(UserWarning):
    """Emitted when an indefinite precision estimate is shifted before use."""
