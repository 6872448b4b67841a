"""Exception hierarchy used across the package."""


class StWaveError(Exception):
    """Base class for all errors raised by :mod:`stwave`."""


class DomainError(StWaveError, ValueError):
    """A point, interval or parameter lies outside its admissible domain."""


class InvalidRegularityError(StWaveError, ValueError):
    pass


class InvalidSizeError(StWaveError, ValueError):
    pass


class InvalidParameterError(StWaveError, ValueError):
    pass


class UnsupportedError(StWaveError, NotImplementedError):
    pass


class GeometryError(StWaveError, ArithmeticError):
    """Singular or orientation-reversing geometry Jacobian."""


class NumericalError(StWaveError, ArithmeticError):
    pass


class SingularSystemError(NumericalError):
    """Raised when a pivot of the LU factorization is numerically zero."""

    def __init__(self, message, pivot_ratio=None):
        super().__init__(message)
        self.pivot_ratio = pivot_ratio


class UndefinedRatioError(StWaveError, ZeroDivisionError):
    pass


class ConfigParseError(StWaveError, ValueError):
    """Malformed experiment configuration.

    Carries the offending section, field and (when known) line number.
    """

    def __init__(self, message, section=None, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section is not None:
            where.append(f"section [{section}]")
        if field is not None:
            where.append(f"field '{field}'")
        full = f"{', '.join(where)}: {message}" if where else message
        super().__init__(full)
        self.section = section
        self.field = field
        self.line = line
