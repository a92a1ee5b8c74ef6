"""Exception hierarchy."""
from __future__ import annotations


class DriftwatchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DriftwatchError, ValueError):
    pass


class BinningMismatchError(DriftwatchError, ValueError):
    def __init__(self, left, right):
        super().__init__(f"distributions use different binnings: {left} vs {right}")
        self.left = left
        self.right = right


class ScoreOutOfDomainError(DriftwatchError, ValueError):
    def __init__(self, score: float, index: int | None, binning):
        where = f" at index {index}" if index is not None else ""
        super().__init__(
            f"score {score!r}{where} outside [{binning.domain_low}, {binning.domain_high}]"
        )
        self.score = score
        self.index = index


class EmptyWindowError(DriftwatchError, ValueError):
    pass


class PreEpochError(DriftwatchError, ValueError):
    pass


class WindowClosedError(DriftwatchError):
    pass


class RoutingError(DriftwatchError, ValueError):
    pass


class NoBaselineError(DriftwatchError, ValueError):
    """Raised when there is no history yet; the current window only seeds it."""


class MainModelAbsentError(DriftwatchError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "main model absent"


class AttributionError(DriftwatchError, ValueError):
    pass


class SnapshotError(DriftwatchError):
    """Corrupt, unreadable or version-incompatible snapshot."""


class ConfigMismatchError(SnapshotError):
    """Snapshot was taken under a different monitor configuration."""


class ErrorBudgetExceeded(DriftwatchError):
    def __init__(self, errors):
        super().__init__(f"CSV error budget exceeded after {len(errors)} bad rows")
        self.errors = errors


class CsvFormatError(DriftwatchError, ValueError):
    """The CSV header is missing or lacks required columns."""
