"""Exception hierarchy shared by the numerical modules."""


class NumericalError(RuntimeError):
    """Base class for failures of a linear solve, eigen-solve or iteration."""


class NearSpectrumError(NumericalError):
    """A resolvent was requested at (or numerically at) a point of the spectrum."""

    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


class FeedbackSingularError(NumericalError):
    """``1 - K D_lambda`` vanishes, so the closed loop is not invertible at lambda."""


class UnstableGeneratorError(NumericalError):
    """A generator with positive spectral abscissa was used where a stable one is required."""


class ConvergenceError(NumericalError):
    """An iterative estimator did not reach its tolerance."""


class NearSpectrumWarning(UserWarning):
    """Emitted when a resolvent point lies close to, but not on, the discrete spectrum."""
