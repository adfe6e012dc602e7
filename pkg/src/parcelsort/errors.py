"""Exception hierarchy shared by every module."""


class ParcelSortError(Exception):
    """Base class for all package errors."""


class InvalidConfigurationError(ParcelSortError, ValueError):
    """A map, distribution, or run configuration violates its invariants."""


class MapParseError(InvalidConfigurationError):
    """Map text could not be parsed; carries the offending line/column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class OrientationError(ParcelSortError):
    """The road network is not strongly connected."""


class InvalidAssignmentError(InvalidConfigurationError):
    """A bin assignment is not a surjection onto the parcel types."""


class WrongSolverError(InvalidConfigurationError):
    """The chosen solver does not apply to this instance shape."""


class PlanningError(ParcelSortError):
    """A goal is unreachable on a network that should be strongly connected."""


class DeadlockError(ParcelSortError):
    """A simulation exceeded its task-age liveness bound."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}
