"""Exception hierarchy shared by every qmonitor module."""


class QMonitorError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QMonitorError, ValueError):
    """A physical or numerical parameter violates its invariant."""


class GridTooNarrow(QMonitorError):
    """The spatial grid truncates a state that should vanish at the walls."""


class GridMismatch(QMonitorError):
    """Two wavefunctions live on different grids."""


class NumericalInstability(QMonitorError):
    """The norm grew during a step whose exact counterpart is a contraction."""


class BoundaryLeak(QMonitorError):
    """Probability reached the outer band of the grid."""


class SpectralLeak(QMonitorError):
    """Weight reached the top of the resolvable momentum band."""


class NonPositiveVariance(QMonitorError):
    """The closed-form inverse variance evaluated to a non-positive number."""


class DegenerateProfile(QMonitorError):
    """The probability profile integrates to zero."""


class ZeroPeak(QMonitorError):
    """The probability profile vanishes at epsilon = 0."""


class FitDiverged(QMonitorError):
    """The Gaussian least-squares fit produced a non-physical width."""


class SizeGuard(QMonitorError):
    """A reference computation was asked to run at a prohibitive size."""


class ConfigError(QMonitorError):
    """A run configuration could not be parsed."""

    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ParseError(ConfigError):
    """The configuration document is malformed or names unknown fields."""
