"""Exception hierarchy.

Two families matter to callers: :class:`DataError` (the input cannot be
tested as given) and :class:`NumericError` (a computation left its safe
range). The CLI maps them to exit codes 2 and 3.
"""


class CfmgfError(Exception):
    """Base class for every error raised by this package."""


class DataError(CfmgfError, ValueError):
    """The supplied data are unusable for the requested operation."""


class NumericError(CfmgfError, ArithmeticError):
    """A numerical guard tripped."""


class TooFewRows(DataError):
    pass


class NonFiniteData(DataError):
    pass


class DegenerateData(DataError):
    pass


class BadParameter(CfmgfError, ValueError):
    pass


class GammaTooSmall(BadParameter):
    pass


class DimensionTooLarge(BadParameter):
    pass


class NotSPD(NumericError):
    pass


class SingularCovariance(NotSPD, DataError):
    pass


class ExponentOverflow(NumericError, OverflowError):
    pass


class NonFinite(NumericError):
    pass


class NonStationary(BadParameter):
    pass


class NumericBlowup(NumericError):
    pass


class NoConvergence(NumericError):
    pass


class BootstrapUnstable(NumericError):
    pass
