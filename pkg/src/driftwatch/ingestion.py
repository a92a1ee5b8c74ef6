"""Event parsing, routing into window accumulators, and state snapshots.

The :class:`Engine` owns one monitor per class label. Events are applied in
arrival order; when an event belongs to a later window than the open one,
the open window is closed and evaluated before the event is applied.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, TextIO

from driftwatch.divergence import ScoreDistribution
from driftwatch.errors import (
    ConfigMismatchError,
    CsvFormatError,
    ErrorBudgetExceeded,
    PreEpochError,
    SnapshotError,
)
from driftwatch.events import CSV_COLUMNS, PredictionEvent, parse_timestamp
from driftwatch.monitor import (
    Alert,
    DivergenceReading,
    Metric,
    MonitorConfig,
    Severity,
    WindowEvaluation,
    evaluate_window,
    reading_from_dict,
)
from driftwatch.windowing import (
    TimeWindow,
    WindowAccumulator,
    WindowStatus,
    accumulate,
    assign_window,
    close_window,
)

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = "driftwatch-snapshot"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class RowError:
    """A rejected CSV row. ``row`` is the 1-based line number (header is 1)."""

    row: int
    message: str

    def __str__(self) -> str:
        return f"row {self.row}: {self.message}"


def parse_event_csv(
    stream: TextIO, error_budget: int | None = None
) -> Iterator[PredictionEvent | RowError]:
    """Yield one event per valid row and a :class:`RowError` per invalid one.

    Bad rows do not stop the stream until more than ``error_budget`` of them
    have been seen, at which point :class:`ErrorBudgetExceeded` is raised.
    """
    reader = csv.DictReader(stream)
    header = reader.fieldnames
    if not header:
        raise CsvFormatError("row 1: missing header")
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise CsvFormatError(f"row 1: missing column(s): {', '.join(missing)}")
    errors: list[RowError] = []
    for record in reader:
        row = reader.line_num
        try:
            if None in record:
                raise ValueError("unexpected extra field(s)")
            event = PredictionEvent.from_dict(record)
        except ValueError as exc:
            err = RowError(row, str(exc))
            errors.append(err)
            if error_budget is not None and len(errors) > error_budget:
                raise ErrorBudgetExceeded(errors) from None
            yield err
        else:
            yield event


def write_event_csv(events: Iterable[PredictionEvent], stream: TextIO) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    n = 0
    for event in events:
        writer.writerow(event.to_row())
        n += 1
    return n


@dataclass
class Diagnostics:
    accepted: int = 0
    duplicate: int = 0
    late: int = 0
    pre_epoch: int = 0
    unregistered: int = 0
    invalid: int = 0

    @property
    def rejected(self) -> int:
        return self.pre_epoch + self.unregistered + self.invalid

    @property
    def total(self) -> int:
        return self.accepted + self.rejected + self.duplicate + self.late

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["rejected"] = self.rejected
        doc["total"] = self.total
        return doc


@dataclass(frozen=True)
class ClosedWindow:
    """What happened when a window closed, kept for reporting."""

    class_label: str
    window: TimeWindow
    sample_counts: dict[str, int]
    readings: tuple[DivergenceReading, ...]
    alerts: tuple[Alert, ...]
    notes: tuple[str, ...]
    # Change of each predictive pair relative to the first window it was evaluated in.
    pair_deltas: dict[str, float] = field(default_factory=dict)

    @property
    def studies(self) -> int:
        return max(self.sample_counts.values(), default=0)


@dataclass
class ClassMonitor:
    """Monitoring state for one class label."""

    class_label: str
    open: WindowAccumulator | None = None
    last_closed_index: int = -1
    histories: dict[str, list[ScoreDistribution]] = field(default_factory=dict)
    pair_baselines: dict[str, float] = field(default_factory=dict)
    closed: list[ClosedWindow] = field(default_factory=list)


class Engine:
    """Applies prediction events to per-label monitors in arrival order.

    Not thread-safe; callers serialize access (see :mod:`driftwatch.service`).
    """

    def __init__(
        self,
        config: MonitorConfig,
        on_alert: Callable[[Alert, str], None] | None = None,
    ) -> None:
        self.config = config
        self.monitors: dict[str, ClassMonitor] = {}
        self.seen: set[tuple[str, str, str]] = set()
        self.diagnostics = Diagnostics()
        self.alerts_emitted = 0
        self.on_alert = on_alert
        self._models = frozenset(config.models)

    def ingest(self, event: PredictionEvent) -> list[Alert]:
        """Route one event; returns alerts raised by any window it closed."""
        diag = self.diagnostics
        if event.model_id not in self._models:
            diag.unregistered += 1
            logger.debug("unregistered model %s dropped", event.model_id)
            return []
        try:
            window = assign_window(event.timestamp, self.config.window)
        except PreEpochError:
            diag.pre_epoch += 1
            return []
        if event.key in self.seen:
            diag.duplicate += 1
            return []
        mon = self.monitors.get(event.class_label)
        if mon is None:
            mon = self.monitors[event.class_label] = ClassMonitor(event.class_label)
        if window.index <= mon.last_closed_index:
            diag.late += 1
            return []
        emitted: list[Alert] = []
        if mon.open is not None and window.index > mon.open.window.index:
            emitted = self._close(mon)
        if mon.open is None:
            mon.open = WindowAccumulator(window, self.config.binning)
        accumulate(mon.open, event)
        self.seen.add(event.key)
        diag.accepted += 1
        return emitted

    def ingest_many(self, events: Iterable[PredictionEvent]) -> list[Alert]:
        emitted = []
        for event in events:
            emitted.extend(self.ingest(event))
        return emitted

    def record_invalid(self, n: int = 1) -> None:
        self.diagnostics.invalid += n

    def finalize(self) -> list[Alert]:
        """Close and evaluate every open window (end of a replay)."""
        emitted = []
        for label in sorted(self.monitors):
            mon = self.monitors[label]
            if mon.open is not None:
                emitted.extend(self._close(mon))
        return emitted

    def _close(self, mon: ClassMonitor) -> list[Alert]:
        acc = mon.open
        assert acc is not None
        counts = acc.sample_counts()
        result = close_window(acc, self.config.window)
        evaluation: WindowEvaluation = evaluate_window(
            acc.window, result, mon.histories, self.config
        )
        k = self.config.baseline.k
        for model in self.config.models:
            dist = result.get(model)
            if isinstance(dist, ScoreDistribution):
                history = mon.histories.setdefault(model, [])
                history.append(dist)
                del history[:-k]
        deltas = {}
        for r in evaluation.readings:
            if r.metric is Metric.PREDICTIVE:
                base = mon.pair_baselines.setdefault(r.pair, r.value.value)
                deltas[r.pair] = r.value.value - base
        mon.closed.append(
            ClosedWindow(
                mon.class_label,
                acc.window,
                counts,
                tuple(evaluation.readings),
                tuple(evaluation.alerts),
                tuple(evaluation.notes),
                deltas,
            )
        )
        mon.last_closed_index = acc.window.index
        mon.open = None
        for alert in evaluation.alerts:
            self.alerts_emitted += 1
            if self.on_alert is not None:
                self.on_alert(alert, mon.class_label)
        return list(evaluation.alerts)

    def closed_windows(self) -> list[ClosedWindow]:
        return [cw for label in sorted(self.monitors) for cw in self.monitors[label].closed]

    def readings(self) -> list[tuple[str, DivergenceReading]]:
        return [(cw.class_label, r) for cw in self.closed_windows() for r in cw.readings]

    def alerts(self) -> list[tuple[str, Alert]]:
        return [(cw.class_label, a) for cw in self.closed_windows() for a in cw.alerts]

    def status(self) -> dict:
        labels = {}
        for label in sorted(self.monitors):
            mon = self.monitors[label]
            labels[label] = {
                "current_window": mon.open.window.label if mon.open else None,
                "sample_counts": mon.open.sample_counts() if mon.open else {},
                "closed_windows": len(mon.closed),
            }
        return {
            "config_digest": self.config.digest(),
            "class_labels": labels,
            "diagnostics": self.diagnostics.to_dict(),
            "alerts_emitted": self.alerts_emitted,
        }


def replay_csv(
    stream: TextIO, engine: Engine, error_budget: int | None = None
) -> list[RowError]:
    """Feed a CSV stream through ``engine`` and finalize it."""
    errors = []
    for item in parse_event_csv(stream, error_budget):
        if isinstance(item, RowError):
            engine.record_invalid()
            errors.append(item)
        else:
            engine.ingest(item)
    engine.finalize()
    return errors


# -- snapshots -----------------------------------------------------------------


def _window_from_dict(doc: Mapping) -> TimeWindow:
    return TimeWindow(
        doc["index"], parse_timestamp(doc["start"]), parse_timestamp(doc["end"]), doc["label"]
    )


def _alert_state(alert: Alert) -> dict:
    return {
        "window": alert.window.to_dict(),
        "metric": alert.metric.value,
        "readings": [r.to_dict() for r in alert.readings],
        "suspect": alert.suspect,
        "threshold": alert.threshold,
        "severity": alert.severity.value,
    }


def _alert_from_state(doc: Mapping) -> Alert:
    return Alert(
        _window_from_dict(doc["window"]),
        Metric(doc["metric"]),
        tuple(reading_from_dict(r) for r in doc["readings"]),
        doc["suspect"],
        doc["threshold"],
        Severity(doc["severity"]),
    )


def _dist_state(d: ScoreDistribution) -> dict:
    return {"mass": list(d.mass), "sample_count": d.sample_count}


def _engine_state(engine: Engine) -> dict:
    monitors = {}
    for label in sorted(engine.monitors):
        mon = engine.monitors[label]
        monitors[label] = {
            "open": mon.open.to_dict() if mon.open else None,
            "last_closed_index": mon.last_closed_index,
            "histories": {
                m: [_dist_state(d) for d in h] for m, h in sorted(mon.histories.items())
            },
            "pair_baselines": dict(sorted(mon.pair_baselines.items())),
            "closed": [
                {
                    "window": cw.window.to_dict(),
                    "sample_counts": cw.sample_counts,
                    "readings": [r.to_dict() for r in cw.readings],
                    "alerts": [_alert_state(a) for a in cw.alerts],
                    "notes": list(cw.notes),
                    "pair_deltas": cw.pair_deltas,
                }
                for cw in mon.closed
            ],
        }
    return {
        "config": engine.config.to_dict(),
        "diagnostics": asdict(engine.diagnostics),
        "seen": sorted(list(k) for k in engine.seen),
        "alert_log_offset": engine.alerts_emitted,
        "monitors": monitors,
    }


def _canonical(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


@dataclass(frozen=True)
class StateSnapshot:
    """Quiescent-point engine state plus the digest of the config it ran under."""

    config_digest: str
    payload: dict

    def to_bytes(self) -> bytes:
        doc = {
            "magic": SNAPSHOT_MAGIC,
            "version": SNAPSHOT_VERSION,
            "config_digest": self.config_digest,
            "checksum": hashlib.sha256(_canonical(self.payload)).hexdigest(),
            "payload": self.payload,
        }
        return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False).encode() + b"\n"

    @classmethod
    def from_bytes(cls, data: bytes) -> StateSnapshot:
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SnapshotError(f"corrupt snapshot: {exc}") from None
        if not isinstance(doc, dict) or doc.get("magic") != SNAPSHOT_MAGIC:
            raise SnapshotError("not a driftwatch snapshot (bad magic header)")
        if doc.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(
                f"unsupported snapshot version {doc.get('version')!r} "
                f"(expected {SNAPSHOT_VERSION})"
            )
        payload = doc.get("payload")
        if hashlib.sha256(_canonical(payload)).hexdigest() != doc.get("checksum"):
            raise SnapshotError("corrupt snapshot: checksum mismatch")
        return cls(doc["config_digest"], payload)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> StateSnapshot:
        return cls.from_bytes(Path(path).read_bytes())


def snapshot(engine: Engine) -> StateSnapshot:
    return StateSnapshot(engine.config.digest(), _engine_state(engine))


def restore(
    snap: StateSnapshot,
    config: MonitorConfig | None = None,
    on_alert: Callable[[Alert, str], None] | None = None,
) -> Engine:
    """Rebuild an engine from ``snap``.

    Raises:
        ConfigMismatchError: ``config`` differs from the one the snapshot was taken under.
    """
    payload = snap.payload
    embedded = MonitorConfig.from_dict(payload["config"])
    if embedded.digest() != snap.config_digest:
        raise SnapshotError("corrupt snapshot: embedded config does not match its digest")
    if config is None:
        config = embedded
    elif config.digest() != snap.config_digest:
        raise ConfigMismatchError(
            "snapshot was taken under a different monitor configuration; refusing to restore"
        )
    engine = Engine(config, on_alert=on_alert)
    engine.diagnostics = Diagnostics(**payload["diagnostics"])
    engine.seen = {tuple(k) for k in payload["seen"]}
    engine.alerts_emitted = payload["alert_log_offset"]
    binning = config.binning
    for label, doc in payload["monitors"].items():
        mon = ClassMonitor(label)
        mon.last_closed_index = doc["last_closed_index"]
        mon.histories = {
            m: [ScoreDistribution(binning, d["mass"], d["sample_count"]) for d in h]
            for m, h in doc["histories"].items()
        }
        mon.pair_baselines = dict(doc["pair_baselines"])
        if doc["open"] is not None:
            acc_doc = doc["open"]
            mon.open = WindowAccumulator(
                _window_from_dict(acc_doc["window"]),
                binning,
                {m: list(c) for m, c in acc_doc["per_model"].items()},
                WindowStatus(acc_doc["status"]),
            )
        for cw in doc["closed"]:
            mon.closed.append(
                ClosedWindow(
                    label,
                    _window_from_dict(cw["window"]),
                    dict(cw["sample_counts"]),
                    tuple(reading_from_dict(r) for r in cw["readings"]),
                    tuple(_alert_from_state(a) for a in cw["alerts"]),
                    tuple(cw["notes"]),
                    dict(cw["pair_deltas"]),
                )
            )
        engine.monitors[label] = mon
    return engine


__all__ = [
    "ClosedWindow",
    "Diagnostics",
    "Engine",
    "PredictionEvent",
    "RowError",
    "StateSnapshot",
    "parse_event_csv",
    "replay_csv",
    "restore",
    "snapshot",
    "write_event_csv",
]
