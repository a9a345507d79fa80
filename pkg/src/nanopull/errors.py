"""Exception and warning types raised by nanopull."""


class NanopullError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(NanopullError, ValueError):
    """A numeric input is outside its structural domain (non-positive length, etc.)."""


class ModelAssumptionError(NanopullError, ValueError):
    """Input violates an assumption of the physical model (e.g. non-metallic tube)."""


class DegenerateDistributionError(NanopullError, ValueError):
    """The Fermi step makes the requested quantity ill-defined (mu = 0 at T = 0)."""


class InternalResonanceError(NanopullError, ArithmeticError):
    """sin(2*alpha*L) vanishes, so the 1-D Green function does not exist."""

    def __init__(self, message, omega=None, alpha_l=None):
        super().__init__(message)
        self.omega = omega
        self.alpha_l = alpha_l


class TruncationError(NanopullError, ArithmeticError):
    """A spectral integral was cut off before its tail became negligible."""

    def __init__(self, message, suggested_h_max=None):
        super().__init__(message)
        self.suggested_h_max = suggested_h_max


class RegularizationError(NanopullError, ArithmeticError):
    """A principal-value limit failed to settle under refinement."""


class ResonanceOrDiscretizationError(NanopullError, ArithmeticError):
    """The collocation matrix is singular or too ill-conditioned to trust."""


class AnalyticSingularityError(NanopullError, ArithmeticError):
    """A denominator of the closed-form force is (numerically) zero."""


class ConfigError(NanopullError, ValueError):
    """A config document or sweep block is malformed."""


class OutputError(NanopullError, OSError):
    """Writing a result file failed; the message carries the path."""


class ValidityWarning(UserWarning):
    """Parameters lie outside the window where the conductivity model is trusted."""


class ThresholdWarning(UserWarning):
    """Photon energy sits inside the exclusion band around 2*mu."""
