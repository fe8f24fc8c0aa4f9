#!/usr/bin/env python3
"""
Exception and warning types shared by the calculations and the command line.

Every error carries a stable machine code and the exit status the CLI maps it to:
2 for usage problems, 3 for numerical/domain problems, 4 for file problems.
"""


class PhotoacousticError(Exception):
    code = "ERROR"
    exit_status = 1

    def __init__(self, message: str, code: str = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def one_line(self) -> str:
        """Single machine-parsable line for stderr"""
        message = str(self).replace("\n", " ")
        return f"error code={self.code} message={message}"


# --- usage (exit 2) ---

class UsageError(PhotoacousticError):
    code = "USAGE"
    exit_status = 2


class ConfigError(UsageError):
    code = "CONFIG"


# --- numerical / domain (exit 3) ---

class NumericalError(PhotoacousticError):
    code = "NUMERICAL"
    exit_status = 3


class ResolutionError(NumericalError):
    code = "UNDER_RESOLVED"


class SeriesLengthError(NumericalError):
    code = "SERIES_TOO_SHORT"


class SingularityError(NumericalError):
    code = "SINGULAR_POINT"


class GridAlignmentError(NumericalError):
    code = "GRID_ALIGNMENT"


class DomainError(NumericalError):
    code = "DOMAIN"


class LocalityError(DomainError):
    code = "LOCALITY"


class RootFindingError(NumericalError):
    code = "ROOT_FINDING"


class MultipleRootError(NumericalError):
    code = "MULTIPLE_ROOT"


class ValidityError(NumericalError):
    code = "POLE_ZERO_COINCIDENCE"


class DataInsufficiencyError(NumericalError):
    code = "DATA_INSUFFICIENT"


class DivergenceError(NumericalError):
    code = "DIVERGENCE"


# --- files (exit 4) ---

class FileFormatError(PhotoacousticError):
    code = "FILE_FORMAT"
    exit_status = 4


# --- soft conditions ---

class TruncationWarning(UserWarning):
    pass


class ConsistencyWarning(UserWarning):
    pass


class CompatibilityWarning(UserWarning):
    pass
