"""
errors.py
========================
Exceptions raised by levsample. Every error carries the process exit code used by the command line front end and
the HTTP status code used by the web API.
"""
from typing import Optional


class LevsampleError(Exception):
    exit_code = 2
    status_code = 400


class InputError(LevsampleError):
    """The caller supplied data or parameters that cannot be used."""
    exit_code = 2
    status_code = 400


class NumericalError(LevsampleError):
    """The inputs are well-formed, but the computation is numerically impossible."""
    exit_code = 3
    status_code = 422


class DimensionMismatch(InputError):
    pass


class InvalidLambda(InputError):
    pass


class InvalidSize(InputError):
    pass


class InvalidLevel(InputError):
    pass


class InvalidSpec(InputError):
    pass


class TooSmall(InputError):
    pass


class ConfigError(InputError):
    pass


class IoError(InputError):
    pass


class ParseError(InputError):
    """
    A data file could not be parsed.

    :param row: 1-based line number in the file, if known
    :param column: 0-based column index, if known
    """
    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        if row is not None and column is not None:
            message = f"{message} (line {row}, column {column})"
        elif row is not None:
            message = f"{message} (line {row})"
        super().__init__(message)
        self.row = row
        self.column = column


class NonNumeric(ParseError):
    pass


class EmptyFile(ParseError):
    pass


class RankDeficient(NumericalError):
    pass


class SingularSubsample(NumericalError):
    pass


class DegenerateScheme(NumericalError):
    pass


class ZeroProbability(NumericalError):
    pass
