"""Predictive divergence, temporal stability, suspect attribution and alerting.

Predictive divergence compares the main model's score distribution with each
support model (and the supports with each other) over the same window.
Temporal stability compares each model's current distribution with a
moving average of its own past windows. Both use JS divergence in bits.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, NamedTuple, Sequence

from driftwatch.divergence import (
    DEFAULT_BIN_COUNT,
    BinningSpec,
    DivergenceKind,
    DivergenceValue,
    ScoreDistribution,
    js_divergence,
    kl_divergence,
)
from driftwatch.errors import (
    AttributionError,
    ConfigError,
    MainModelAbsentError,
    NoBaselineError,
)
from driftwatch.events import format_timestamp, parse_timestamp
from driftwatch.windowing import (
    DEFAULT_MIN_SAMPLES,
    BaselineMode,
    BaselineSpec,
    Insufficient,
    TimeWindow,
    WindowSpec,
    format_duration,
    moving_average,
    parse_duration,
)

DEFAULT_PREDICTIVE_THRESHOLD = 0.20
DEFAULT_TEMPORAL_THRESHOLD = 0.10
BASELINE = "BASELINE"
INCONCLUSIVE = "INCONCLUSIVE"

CONFIG_KEYS = (
    "main_model",
    "support_models",
    "predictive_threshold",
    "temporal_threshold",
    "baseline_mode",
    "baseline_depth",
    "bin_count",
    "window_duration",
    "window_origin",
    "min_samples",
    "kl_smoothing",
    "window_labels",
)


class Metric(str, enum.Enum):
    PREDICTIVE = "PREDICTIVE"
    TEMPORAL = "TEMPORAL"


class Severity(str, enum.Enum):
    WARN = "WARN"
    CRITICAL = "CRITICAL"


def _check_threshold(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 < value <= 1.0:
        raise ConfigError(f"{name} must lie in (0, 1], got {value}")
    return value


@dataclass(frozen=True)
class MonitorConfig:
    main_model: str
    support_models: tuple[str, ...]
    window: WindowSpec
    predictive_threshold: float = DEFAULT_PREDICTIVE_THRESHOLD
    temporal_threshold: float = DEFAULT_TEMPORAL_THRESHOLD
    baseline: BaselineSpec = field(default_factory=BaselineSpec)
    binning: BinningSpec = field(default_factory=BinningSpec)
    kl_smoothing: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "support_models", tuple(self.support_models))
        if not self.main_model:
            raise ConfigError("main_model is required")
        if not self.support_models:
            raise ConfigError("at least one support model is required")
        if self.main_model in self.support_models:
            raise ConfigError("main_model must not also be a support model")
        if len(set(self.support_models)) != len(self.support_models):
            raise ConfigError("support model ids must be distinct")
        object.__setattr__(
            self,
            "predictive_threshold",
            _check_threshold("predictive_threshold", self.predictive_threshold),
        )
        object.__setattr__(
            self,
            "temporal_threshold",
            _check_threshold("temporal_threshold", self.temporal_threshold),
        )
        if self.kl_smoothing is not None and not (
            self.kl_smoothing >= 0 and math.isfinite(self.kl_smoothing)
        ):
            raise ConfigError("kl_smoothing must be a finite value >= 0")

    @property
    def models(self) -> tuple[str, ...]:
        return (self.main_model, *self.support_models)

    @classmethod
    def from_dict(cls, doc: Mapping) -> MonitorConfig:
        unknown = set(doc) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        for key in ("main_model", "support_models", "window_duration", "window_origin"):
            if key not in doc:
                raise ConfigError(f"missing config key: {key}")
        supports = doc["support_models"]
        if isinstance(supports, str) or not isinstance(supports, Sequence):
            raise ConfigError("support_models must be a list of model ids")
        try:
            origin = parse_timestamp(str(doc["window_origin"]))
        except ValueError as exc:
            raise ConfigError(f"bad window_origin: {exc}") from None
        mode = doc.get("baseline_mode", BaselineMode.PREVIOUS_WINDOW.value)
        try:
            mode = BaselineMode(str(mode).lower())
        except ValueError:
            raise ConfigError(f"unknown baseline_mode {mode!r}") from None
        smoothing = doc.get("kl_smoothing")
        return cls(
            main_model=str(doc["main_model"]),
            support_models=tuple(str(s) for s in supports),
            window=WindowSpec(
                duration=parse_duration(doc["window_duration"]),
                origin=origin,
                min_samples=int(doc.get("min_samples", DEFAULT_MIN_SAMPLES)),
                labels=tuple(doc.get("window_labels", ())),
            ),
            predictive_threshold=doc.get("predictive_threshold", DEFAULT_PREDICTIVE_THRESHOLD),
            temporal_threshold=doc.get("temporal_threshold", DEFAULT_TEMPORAL_THRESHOLD),
            baseline=BaselineSpec(mode, int(doc.get("baseline_depth", 1))),
            binning=BinningSpec(int(doc.get("bin_count", DEFAULT_BIN_COUNT))),
            kl_smoothing=None if smoothing is None else float(smoothing),
        )

    @classmethod
    def load(cls, path) -> MonitorConfig:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        doc = {
            "main_model": self.main_model,
            "support_models": list(self.support_models),
            "predictive_threshold": self.predictive_threshold,
            "temporal_threshold": self.temporal_threshold,
            "baseline_mode": self.baseline.mode.value,
            "baseline_depth": self.baseline.depth,
            "bin_count": self.binning.bin_count,
            "window_duration": format_duration(self.window.duration),
            "window_origin": format_timestamp(self.window.origin),
            "min_samples": self.window.min_samples,
            "kl_smoothing": self.kl_smoothing,
        }
        if self.window.labels:
            doc["window_labels"] = list(self.window.labels)
        return doc

    def digest(self) -> str:
        """Content hash over every field that affects monitoring results."""
        doc = self.to_dict()
        doc["window_duration_seconds"] = self.window.duration.total_seconds()
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True)
class DivergenceReading:
    metric: Metric
    model_a: str
    model_b: str
    window: TimeWindow
    value: DivergenceValue
    kl: DivergenceValue | None = None

    def __post_init__(self) -> None:
        if self.metric is Metric.PREDICTIVE:
            if self.model_a == self.model_b or BASELINE in (self.model_a, self.model_b):
                raise ValueError("predictive readings need two distinct models")
        elif self.model_b != BASELINE:
            raise ValueError("temporal readings compare against BASELINE")

    @property
    def pair(self) -> str:
        return f"{self.model_a}-{self.model_b}"

    def to_dict(self) -> dict:
        doc = {
            "window": self.window.to_dict(),
            "metric": self.metric.value,
            "model_a": self.model_a,
            "model_b": self.model_b,
            "value": self.value.value,
        }
        if self.kl is not None:
            doc["kl_bits"] = None if self.kl.is_infinite else self.kl.value
            doc["kl_smoothed"] = self.kl.smoothed
        return doc


def severity_for(value: float, threshold: float) -> Severity:
    return Severity.CRITICAL if value >= 2.0 * threshold else Severity.WARN


@dataclass(frozen=True)
class Alert:
    window: TimeWindow
    metric: Metric
    readings: tuple[DivergenceReading, ...]
    suspect: str
    threshold: float
    severity: Severity

    def __post_init__(self) -> None:
        object.__setattr__(self, "readings", tuple(self.readings))
        if not self.readings:
            raise ValueError("an alert needs at least one offending reading")
        for r in self.readings:
            if not r.value.value > self.threshold:
                raise ValueError(
                    f"reading {r.pair}={r.value.value} does not exceed threshold {self.threshold}"
                )

    @property
    def value(self) -> float:
        return max(r.value.value for r in self.readings)

    def to_dict(self) -> dict:
        doc: dict = {
            "window_label": self.window.label,
            "metric": self.metric.value,
        }
        if self.metric is Metric.PREDICTIVE:
            doc["pairs"] = [
                {"model_a": r.model_a, "model_b": r.model_b, "value": round(r.value.value, 6)}
                for r in self.readings
            ]
        else:
            doc["model"] = self.readings[0].model_a
        doc.update(
            value=round(self.value, 6),
            threshold=self.threshold,
            suspect=self.suspect,
            severity=self.severity.value,
            # Event-time close of the window, so replays stay deterministic.
            timestamp=format_timestamp(self.window.end),
        )
        return doc


class WindowEvaluation(NamedTuple):
    readings: list[DivergenceReading]
    alerts: list[Alert]
    notes: list[str]


def _pair_reading(
    metric: Metric,
    a: str,
    b: str,
    p: ScoreDistribution,
    q: ScoreDistribution,
    window: TimeWindow,
    config: MonitorConfig,
) -> DivergenceReading:
    kl = None
    if config.kl_smoothing is not None:
        kl = kl_divergence(p, q, smoothing=config.kl_smoothing or None)
    return DivergenceReading(metric, a, b, window, js_divergence(p, q), kl)


def predictive_divergence(
    dists: Mapping[str, ScoreDistribution | Insufficient],
    config: MonitorConfig,
    window: TimeWindow,
) -> list[DivergenceReading]:
    """JS readings for every unordered pair among the main and support models.

    Pairs with a missing or insufficient member are skipped.
    """
    if config.main_model not in dists:
        raise MainModelAbsentError(f"main model absent: {config.main_model}")
    readings = []
    for a, b in combinations(config.models, 2):
        p, q = dists.get(a), dists.get(b)
        if isinstance(p, ScoreDistribution) and isinstance(q, ScoreDistribution):
            readings.append(_pair_reading(Metric.PREDICTIVE, a, b, p, q, window, config))
    return readings


def temporal_stability(
    model: str,
    current: ScoreDistribution,
    history: Sequence[ScoreDistribution],
    config: MonitorConfig,
    window: TimeWindow,
) -> DivergenceReading:
    """JS between ``current`` and the moving average of ``history``.

    Raises:
        NoBaselineError: history is empty, so this window only seeds it.
    """
    if not history:
        raise NoBaselineError(f"bootstrap window for {model}: no history yet")
    baseline = moving_average(history, config.baseline.k)
    return _pair_reading(Metric.TEMPORAL, model, BASELINE, current, baseline, window, config)


def attribute_suspect(readings: Sequence[DivergenceReading], threshold: float) -> str:
    """Return the one model common to every pair above ``threshold``.

    If every exceeding pair contains model ``m``, any pair without ``m`` is
    necessarily at or below the threshold, so the rule reduces to finding a
    unique common member. Anything else is ``INCONCLUSIVE``: a single
    exceeding pair has two equally plausible suspects, and disjoint
    exceeding pairs suggest a shift affecting every model.
    """
    if not readings:
        raise AttributionError("nothing to attribute")
    exceeding = [r for r in readings if r.value.value > threshold]
    if not exceeding:
        return INCONCLUSIVE
    common = {exceeding[0].model_a, exceeding[0].model_b}
    for r in exceeding[1:]:
        common &= {r.model_a, r.model_b}
    if len(common) == 1:
        return common.pop()
    return INCONCLUSIVE


def predictive_alert(
    readings: Sequence[DivergenceReading], threshold: float
) -> Alert | None:
    """Bundle every predictive reading above ``threshold`` into one alert, with attribution."""
    offending = tuple(r for r in readings if r.value.value > threshold)
    if not offending:
        return None
    top = max(r.value.value for r in offending)
    return Alert(
        offending[0].window,
        Metric.PREDICTIVE,
        offending,
        attribute_suspect(readings, threshold),
        threshold,
        severity_for(top, threshold),
    )


def temporal_alert(reading: DivergenceReading, threshold: float) -> Alert | None:
    if not reading.value.value > threshold:
        return None
    return Alert(
        reading.window,
        Metric.TEMPORAL,
        (reading,),
        reading.model_a,
        threshold,
        severity_for(reading.value.value, threshold),
    )


def evaluate_window(
    window: TimeWindow,
    window_result: Mapping[str, ScoreDistribution | Insufficient],
    histories: Mapping[str, Sequence[ScoreDistribution]],
    config: MonitorConfig,
) -> WindowEvaluation:
    """Compute all readings for a closed window and the alerts they trigger.

    Emits at most one predictive alert (bundling every offending pair) and
    one temporal alert per offending model. Does not mutate ``histories``.
    """
    notes: list[str] = []
    for model in config.models:
        entry = window_result.get(model)
        if entry is None:
            notes.append(f"{window.label}: {model} absent")
        elif isinstance(entry, Insufficient):
            notes.append(
                f"{window.label}: {model} insufficient "
                f"({entry.sample_count} < {entry.min_samples} samples)"
            )

    readings: list[DivergenceReading] = []
    alerts: list[Alert] = []

    try:
        predictive = predictive_divergence(window_result, config, window)
    except MainModelAbsentError as exc:
        notes.append(f"{window.label}: {exc}; predictive divergence not evaluated")
        predictive = []
    readings.extend(predictive)
    expected_pairs = len(config.models) * (len(config.models) - 1) // 2
    if predictive and len(predictive) < expected_pairs:
        notes.append(
            f"{window.label}: {len(predictive)} of {expected_pairs} predictive pairs evaluated"
        )
    alert = predictive_alert(predictive, config.predictive_threshold)
    if alert is not None:
        alerts.append(alert)

    for model in config.models:
        current = window_result.get(model)
        if not isinstance(current, ScoreDistribution):
            continue
        try:
            reading = temporal_stability(
                model, current, histories.get(model, ()), config, window
            )
        except NoBaselineError:
            notes.append(f"{window.label}: {model} bootstrap window, no temporal reading")
            continue
        readings.append(reading)
        alert = temporal_alert(reading, config.temporal_threshold)
        if alert is not None:
            alerts.append(alert)
    return WindowEvaluation(readings, alerts, notes)


def reading_from_dict(doc: Mapping) -> DivergenceReading:
    w = doc["window"]
    window = TimeWindow(
        w["index"], parse_timestamp(w["start"]), parse_timestamp(w["end"]), w["label"]
    )
    kl = None
    if "kl_bits" in doc:
        kl_value = math.inf if doc["kl_bits"] is None else doc["kl_bits"]
        kl = DivergenceValue(DivergenceKind.KL, kl_value, doc.get("kl_smoothed", False))
    return DivergenceReading(
        Metric(doc["metric"]),
        doc["model_a"],
        doc["model_b"],
        window,
        DivergenceValue(DivergenceKind.JS, doc["value"]),
        kl,
    )

