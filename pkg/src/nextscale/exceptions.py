"""Exception hierarchy shared by every module."""


class NextScaleError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(NextScaleError, ValueError):
    """Array shapes are inconsistent with each other or with a size request."""


class DomainError(NextScaleError, ValueError):
    """A value lies outside the domain an operation accepts (NaN, negative beta, ...)."""


class FormatError(NextScaleError, ValueError):
    """A file does not conform to the format it claims to be."""


class PersistenceError(NextScaleError, OSError):
    """Reading or writing a file failed at the OS level."""
