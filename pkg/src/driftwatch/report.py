"""Report tables and machine-readable outputs for a finished run.

Human tables show 3 decimals; JSON and CSV outputs keep full precision.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from driftwatch.ingestion import ClosedWindow, Engine
from driftwatch.monitor import Alert, DivergenceReading, Metric, MonitorConfig, Severity

PAIR_SEPARATOR = " vs "
LABEL_SEPARATOR = ": "


@dataclass
class ReportBundle:
    """Everything a report needs, in the two table shapes plus alerts and notes.

    ``predictive`` rows are ``(class_label, window, studies, {pair: reading})``;
    ``temporal`` maps ``(class_label, model)`` to an ordered list of
    ``(window, reading)``.
    """

    config: MonitorConfig
    windows: list[ClosedWindow]
    predictive: list[tuple[str, ClosedWindow, dict[str, DivergenceReading]]] = field(
        default_factory=list
    )
    temporal: dict[tuple[str, str], list[tuple[ClosedWindow, DivergenceReading]]] = field(
        default_factory=dict
    )
    alerts: list[tuple[str, Alert]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_engine(cls, engine: Engine) -> ReportBundle:
        bundle = cls(engine.config, engine.closed_windows())
        bundle.diagnostics = engine.diagnostics.to_dict()
        for cw in bundle.windows:
            pairs = {
                r.pair: r for r in cw.readings if r.metric is Metric.PREDICTIVE
            }
            bundle.predictive.append((cw.class_label, cw, pairs))
            for r in cw.readings:
                if r.metric is Metric.TEMPORAL:
                    bundle.temporal.setdefault((cw.class_label, r.model_a), []).append((cw, r))
            bundle.alerts.extend((cw.class_label, a) for a in cw.alerts)
            bundle.notes.extend(cw.notes)
        return bundle

    @property
    def class_labels(self) -> list[str]:
        return sorted({cw.class_label for cw in self.windows})

    @property
    def pair_names(self) -> list[str]:
        return [f"{a}-{b}" for a, b in combinations(self.config.models, 2)]

    @property
    def has_critical(self) -> bool:
        return any(a.severity is Severity.CRITICAL for _, a in self.alerts)

    def _series(self, label: str, name: str) -> str:
        if len(self.class_labels) > 1:
            return f"{label}{LABEL_SEPARATOR}{name}"
        return name

    # -- machine outputs ------------------------------------------------------

    def readings_json(self) -> str:
        windows = []
        readings = []
        for cw in self.windows:
            windows.append(
                {
                    "class_label": cw.class_label,
                    "window": cw.window.to_dict(),
                    "sample_counts": cw.sample_counts,
                    "notes": list(cw.notes),
                }
            )
            for r in cw.readings:
                doc = {"class_label": cw.class_label, **r.to_dict()}
                if r.metric is Metric.PREDICTIVE:
                    doc["delta_from_reference"] = cw.pair_deltas[r.pair]
                readings.append(doc)
        doc = {
            "config": self.config.to_dict(),
            "windows": windows,
            "readings": readings,
            "diagnostics": self.diagnostics,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def alerts_jsonl(self) -> str:
        return "".join(alert_line(a, label) for label, a in self.alerts)

    def predictive_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window", "series", "value"])
        for label, cw, pairs in self.predictive:
            for r in pairs.values():
                name = f"{r.model_a}{PAIR_SEPARATOR}{r.model_b}"
                writer.writerow([cw.window.label, self._series(label, name), repr(r.value.value)])
        return buf.getvalue()

    def temporal_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window", "series", "value"])
        for cw in self.windows:
            for r in cw.readings:
                if r.metric is Metric.TEMPORAL:
                    writer.writerow(
                        [cw.window.label, self._series(cw.class_label, r.model_a),
                         repr(r.value.value)]
                    )
        return buf.getvalue()

    # -- human report ---------------------------------------------------------

    def _temporal_header(self, prev: ClosedWindow | None, cw: ClosedWindow) -> str:
        if self.config.baseline.k == 1 and prev is not None:
            return f"{cw.window.label}-{prev.window.label}"
        return f"{cw.window.label} vs MA({self.config.baseline.k})"

    def markdown(self) -> str:
        out = ["# Monitoring report", ""]
        cfg = self.config
        out.append(
            f"Main model: {cfg.main_model}; support models: {', '.join(cfg.support_models)}. "
            f"Predictive threshold {cfg.predictive_threshold:.2f}, "
            f"temporal threshold {cfg.temporal_threshold:.2f} (JS divergence, bits)."
        )
        out.append("")
        pairs = self.pair_names
        for label in self.class_labels:
            rows = [(cw, p) for lab, cw, p in self.predictive if lab == label]
            out += [f"## Class label: {label}", "", "### Predictive divergence", ""]
            out.append("| Time Point | Studies | " + " | ".join(f"JSD ({p})" for p in pairs) + " |")
            out.append("|---" * (2 + len(pairs)) + "|")
            for cw, readings in rows:
                cells = [_fmt(readings[p].value.value) if p in readings else "n/a" for p in pairs]
                out.append(f"| {cw.window.label} | {cw.studies} | " + " | ".join(cells) + " |")
            out += ["", "Change from each pair's first evaluated window:", ""]
            out.append("| Time Point | " + " | ".join(f"Δ ({p})" for p in pairs) + " |")
            out.append("|---" * (1 + len(pairs)) + "|")
            for cw, readings in rows:
                cells = [
                    _fmt_signed(cw.pair_deltas[p]) if p in readings else "n/a" for p in pairs
                ]
                out.append(f"| {cw.window.label} | " + " | ".join(cells) + " |")
            out.append("")

            label_windows = [cw for cw in self.windows if cw.class_label == label]
            temporal_windows = [
                (prev, cw)
                for prev, cw in zip([None, *label_windows[:-1]], label_windows)
                if any(r.metric is Metric.TEMPORAL for r in cw.readings)
            ]
            out += ["### Temporal stability", ""]
            if not temporal_windows:
                out += ["No temporal readings yet (bootstrap window only seeds history).", ""]
            else:
                headers = [self._temporal_header(prev, cw) for prev, cw in temporal_windows]
                out.append("| Model | " + " | ".join(headers) + " |")
                out.append("|---" * (1 + len(headers)) + "|")
                for model in cfg.models:
                    by_window = {
                        cw.window.index: r for cw, r in self.temporal.get((label, model), [])
                    }
                    cells = [
                        _fmt(by_window[cw.window.index].value.value)
                        if cw.window.index in by_window else "n/a"
                        for _, cw in temporal_windows
                    ]
                    out.append(f"| {model} | " + " | ".join(cells) + " |")
                out.append("")

        out += ["## Alerts", ""]
        if not self.alerts:
            out.append("No alerts.")
        for label, a in self.alerts:
            if a.metric is Metric.PREDICTIVE:
                what = ", ".join(f"{r.pair}={_fmt(r.value.value)}" for r in a.readings)
            else:
                what = f"{a.readings[0].model_a}={_fmt(a.value)}"
            out.append(
                f"- [{a.severity.value}] {label} / {a.window.label}: {a.metric.value} "
                f"{what} > {a.threshold:.2f}; suspect {a.suspect}"
            )
        out += ["", "## Coverage notes", ""]
        out += [f"- {n}" for n in self.notes] or ["None."]
        out += ["", "## Diagnostics", ""]
        out += [f"- {k}: {v}" for k, v in self.diagnostics.items()]
        return "\n".join(out) + "\n"

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "readings.json").write_text(self.readings_json(), encoding="utf-8")
        (out / "alerts.jsonl").write_text(self.alerts_jsonl(), encoding="utf-8")
        (out / "report.md").write_text(self.markdown(), encoding="utf-8")
        (out / "predictive.csv").write_text(self.predictive_csv(), encoding="utf-8")
        (out / "temporal.csv").write_text(self.temporal_csv(), encoding="utf-8")


def alert_line(alert: Alert, class_label: str) -> str:
    return json.dumps({"class_label": class_label, **alert.to_dict()}, sort_keys=True) + "\n"


def read_long_csv(path: str | Path) -> list[tuple[str, str, str, float]]:
    """Parse ``predictive.csv``/``temporal.csv`` into ``(window, label, series, value)``.

    ``label`` is empty for single-label runs. Predictive series are
    ``"A vs B"``; temporal series are a model id.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            series = rec["series"]
            label = ""
            if LABEL_SEPARATOR in series:
                label, series = series.split(LABEL_SEPARATOR, 1)
            rows.append((rec["window"], label, series, float(rec["value"])))
    return rows


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _fmt_signed(v: float) -> str:
    return f"{v:+.3f}"
