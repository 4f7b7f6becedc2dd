"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError` so the command line
front end can map them onto a single exit status.
"""


class PdcHomError(Exception):
    """Base class for all package errors."""


class ConfigInvalid(PdcHomError, ValueError):
    pass


class NumericalError(PdcHomError, ValueError):
    pass


class FileFormatError(PdcHomError, ValueError):
    """An input file exists but cannot be parsed."""


class GridTooCoarse(NumericalError):
    pass


class GridTooNarrow(NumericalError):
    pass


class OrderOutOfRange(NumericalError):
    pass


class BasisEscapesGrid(NumericalError):
    pass


class DelayTooLargeForGrid(NumericalError):
    pass


class ZeroNorm(NumericalError):
    pass


class DegenerateGroupDelay(NumericalError):
    pass


class EmptyTrace(NumericalError):
    pass


class TooFewSamples(NumericalError):
    pass


class NonFiniteData(NumericalError):
    pass
