"""Exception hierarchy.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError and its
subclasses -> 3, NumericalError and its subclasses -> 4.
"""


class CashfactorError(Exception):
    """Base class for all package errors."""


class ConfigError(CashfactorError):
    """Invalid or inconsistent run configuration."""


class DataError(CashfactorError):
    """Bad input data: schema violations, empty universes, misalignment."""


class SchemaError(DataError):
    """A file failed schema validation; message names file, line, column."""


class CalendarError(DataError):
    """Trading calendar could not be constructed."""


class UniverseError(DataError):
    """Universe filtering produced an empty admitted set."""


class AlignmentError(DataError):
    """Series required to share dates do not overlap as required."""


class NumericalError(CashfactorError):
    """Numerical failure: singular fits, undefined ratios, failed searches."""


class SingularFitError(NumericalError):
    """Design matrix is rank deficient beyond the conditioning threshold."""

    def __init__(self, message, columns=None):
        super().__init__(message)
        self.columns = list(columns) if columns is not None else []


class StandardizationError(NumericalError):
    """A zero-variance column cannot be standardized."""


class NoFitError(NumericalError):
    """Not enough observations to estimate the signal regression."""


class SharpeUndefinedError(NumericalError):
    """Sharpe ratio undefined: zero variance or too few observations."""


class OptimizationError(NumericalError):
    """Derivative-free search could not produce a result."""
