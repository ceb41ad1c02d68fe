"""Exception hierarchy.

The CLI maps these onto exit codes: data problems exit 2, estimation
failures exit 3.
"""


class DriftwatchError(Exception):
    """Base class for all library errors."""


class ParameterShapeError(DriftwatchError, ValueError):
    """A parameter vector has the wrong length."""


class DomainError(DriftwatchError, ValueError):
    """An argument lies outside its admissible range."""


class DataError(DriftwatchError, ValueError):
    """Observed data are unusable (non-finite, too short, malformed)."""


class DegenerateScaleError(DataError):
    """The CUSUM scale estimate is zero, so the statistic is undefined."""


class EstimationError(DriftwatchError, RuntimeError):
    """No optimizer start produced a finite objective."""
