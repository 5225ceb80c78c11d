"""Typed exceptions shared across the package."""


class JpegIvError(Exception):
    """Base class for all package errors."""


class NonMonotonicGrid(JpegIvError):
    """Grid locations are not strictly increasing."""


class LengthMismatch(JpegIvError):
    """Paired sequences have different lengths."""


class NonFiniteValue(JpegIvError):
    """Input contains NaN or infinity."""


class TooShort(JpegIvError):
    """Input has fewer points than the operation requires."""


class GridTooShort(JpegIvError):
    """Grid does not cover the positions consumed by a filter pass."""


class ZeroGridSpacing(JpegIvError):
    """A filter weight denominator is zero (coincident grid points)."""


class LevelOutOfRange(JpegIvError):
    """Requested decomposition level is outside 1..ceil(log2(n))."""


class TooLarge(JpegIvError):
    """Input exceeds the size limit of a test-scale oracle."""


class DomainError(JpegIvError):
    """Parameter outside its mathematical domain."""


class RankDeficient(JpegIvError):
    """Design matrix does not have full column rank."""


class GammaEstimationFailed(JpegIvError):
    """Selection-index direction search did not produce a usable direction."""


class SingularCovariance(JpegIvError):
    """Covariance matrix is not positive definite."""


class ZeroTruth(JpegIvError):
    """A relative error is requested against a zero true value."""


class WeakInstrument(UserWarning):
    """First-stage F statistic below the conventional strength threshold."""
