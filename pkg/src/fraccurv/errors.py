"""Exception hierarchy for fraccurv."""


class FraccurvError(Exception):
    """Base class for all fraccurv errors."""


class InvalidInputError(FraccurvError):
    """Malformed or out-of-contract input values."""


class OutOfRangeError(FraccurvError):
    """A scalar parameter (eps, r, delta) outside its admissible range."""


class ResolutionError(FraccurvError):
    """Requested eps is too small for the grid spacing (needs eps >= 4h)."""


class MarginError(FraccurvError):
    """Parallel set would clip at the grid border; insufficient padding."""


class BudgetError(FraccurvError):
    """Word/point enumeration would exceed the configured budget."""


class ConfigError(FraccurvError):
    """Configuration file missing or schema-invalid.

    ``violations`` lists every problem found, each with its field path.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])
