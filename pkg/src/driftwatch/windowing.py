"""Time windows, per-window histogram accumulation and moving-average baselines."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence

from driftwatch.divergence import (
    BinningSpec,
    ScoreDistribution,
    ScoreHistogram,
    normalize,
)
from driftwatch.errors import (
    BinningMismatchError,
    ConfigError,
    NoBaselineError,
    PreEpochError,
    RoutingError,
    WindowClosedError,
)
from driftwatch.events import PredictionEvent, format_timestamp, to_utc

DEFAULT_MIN_SAMPLES = 100

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([smhdw])\s*$")
_UNIT_SECONDS = {"s": 1, "m": 60, "h": 3600, "d": 86400, "w": 604800}


def parse_duration(value: str | int | float | timedelta) -> timedelta:
    """Parse ``"30d"``, ``"12h"``, ``"1w"`` or a number of seconds."""
    if isinstance(value, timedelta):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return timedelta(seconds=value)
    m = _DURATION_RE.match(str(value))
    if not m:
        raise ConfigError(f"cannot parse duration {value!r}; use e.g. '30d', '12h', '1w'")
    return timedelta(seconds=float(m.group(1)) * _UNIT_SECONDS[m.group(2)])


def format_duration(td: timedelta) -> str:
    seconds = td.total_seconds()
    for unit in ("w", "d", "h", "m"):
        size = _UNIT_SECONDS[unit]
        if seconds % size == 0:
            return f"{int(seconds // size)}{unit}"
    return f"{seconds:g}s"


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval ``[start, end)``."""

    index: int
    start: datetime
    end: datetime
    label: str

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError("window start must precede its end")

    def contains(self, t: datetime) -> bool:
        return self.start <= t < self.end

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "start": format_timestamp(self.start),
            "end": format_timestamp(self.end),
            "label": self.label,
        }


@dataclass(frozen=True)
class WindowSpec:
    duration: timedelta
    origin: datetime
    min_samples: int = DEFAULT_MIN_SAMPLES
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", to_utc(self.origin))
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.duration <= timedelta(0):
            raise ConfigError("window duration must be positive")
        if self.min_samples < 1:
            raise ConfigError("min_samples must be >= 1")

    def label_for(self, index: int) -> str:
        if index < len(self.labels):
            return self.labels[index]
        return f"W{index}"

    def window(self, index: int) -> TimeWindow:
        start = self.origin + index * self.duration
        return TimeWindow(index, start, start + self.duration, self.label_for(index))


class BaselineMode(str, enum.Enum):
    PREVIOUS_WINDOW = "previous_window"
    MOVING_AVERAGE = "moving_average"


@dataclass(frozen=True)
class BaselineSpec:
    mode: BaselineMode = BaselineMode.PREVIOUS_WINDOW
    depth: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BaselineMode(self.mode))
        if self.depth < 1:
            raise ConfigError("baseline depth must be >= 1")
        if self.mode is BaselineMode.PREVIOUS_WINDOW and self.depth != 1:
            raise ConfigError("previous_window baseline implies depth 1")

    @property
    def k(self) -> int:
        return self.depth


class WindowStatus(str, enum.Enum):
    OPEN = "OPEN"
    CLOSED = "CLOSED"


@dataclass(frozen=True)
class Insufficient:
    """Marker for a model whose window sample count is below ``min_samples``."""

    sample_count: int
    min_samples: int


def assign_window(t: datetime, spec: WindowSpec) -> TimeWindow:
    t = to_utc(t)
    if t < spec.origin:
        raise PreEpochError(f"pre-epoch event: {format_timestamp(t)} is before origin "
                            f"{format_timestamp(spec.origin)}")
    return spec.window((t - spec.origin) // spec.duration)


@dataclass
class WindowAccumulator:
    """Mutable per-window histogram store; one writer while OPEN."""

    window: TimeWindow
    binning: BinningSpec
    per_model: dict[str, list[int]] = field(default_factory=dict)
    status: WindowStatus = WindowStatus.OPEN

    def histogram(self, model_id: str) -> ScoreHistogram:
        return ScoreHistogram(self.binning, tuple(self.per_model[model_id]))

    def histograms(self) -> dict[str, ScoreHistogram]:
        return {m: self.histogram(m) for m in sorted(self.per_model)}

    def sample_counts(self) -> dict[str, int]:
        return {m: sum(c) for m, c in sorted(self.per_model.items())}

    def to_dict(self) -> dict:
        return {
            "window": self.window.to_dict(),
            "status": self.status.value,
            "per_model": {m: list(c) for m, c in sorted(self.per_model.items())},
        }


def accumulate(acc: WindowAccumulator, event: PredictionEvent) -> WindowAccumulator:
    if acc.status is WindowStatus.CLOSED:
        raise WindowClosedError(f"window closed: {acc.window.label}")
    if not acc.window.contains(event.timestamp):
        raise RoutingError(
            f"event at {format_timestamp(event.timestamp)} does not belong to window "
            f"{acc.window.label}"
        )
    idx = acc.binning.index(event.score)
    counts = acc.per_model.get(event.model_id)
    if counts is None:
        counts = acc.per_model[event.model_id] = [0] * acc.binning.bin_count
    counts[idx] += 1
    return acc


def merge_accumulators(partials: Sequence[WindowAccumulator]) -> WindowAccumulator:
    """Combine per-source partial accumulators for the same window.

    Count addition is associative and commutative, so the merge equals
    serial accumulation of the union of events.
    """
    if not partials:
        raise ValueError("nothing to merge")
    first = partials[0]
    merged = WindowAccumulator(first.window, first.binning)
    for part in partials:
        if part.window != first.window:
            raise RoutingError("cannot merge accumulators of different windows")
        if part.binning != first.binning:
            raise BinningMismatchError(first.binning, part.binning)
        for model, counts in part.per_model.items():
            target = merged.per_model.setdefault(model, [0] * first.binning.bin_count)
            for i, c in enumerate(counts):
                target[i] += c
    merged.per_model = dict(sorted(merged.per_model.items()))
    return merged


def close_window(
    acc: WindowAccumulator, spec: WindowSpec
) -> dict[str, ScoreDistribution | Insufficient]:
    if acc.status is WindowStatus.CLOSED:
        raise WindowClosedError(f"window {acc.window.label} already closed")
    acc.status = WindowStatus.CLOSED
    result: dict[str, ScoreDistribution | Insufficient] = {}
    for model, hist in acc.histograms().items():
        if hist.total >= spec.min_samples:
            result[model] = normalize(hist)
        else:
            result[model] = Insufficient(hist.total, spec.min_samples)
    return result


def moving_average(history: Sequence[ScoreDistribution], k: int) -> ScoreDistribution:
    """Per-bin mean of the last ``min(k, len(history))`` distributions."""
    if k < 1:
        raise ConfigError("moving-average depth must be >= 1")
    if not history:
        raise NoBaselineError("no baseline: history is empty")
    recent = list(history[-k:])
    binning = recent[0].binning
    for d in recent[1:]:
        if d.binning != binning:
            raise BinningMismatchError(binning, d.binning)
    n = len(recent)
    mass = [sum(col) / n for col in zip(*(d.mass for d in recent))]
    return ScoreDistribution(binning, mass, sample_count=sum(d.sample_count for d in recent))

