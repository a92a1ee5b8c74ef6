"""The atomic ingestion record."""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

CSV_COLUMNS = ("study_id", "timestamp", "model_id", "class_label", "score")


def to_utc(ts: datetime) -> datetime:
    """Normalize to an aware UTC datetime; naive values are taken as UTC."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return to_utc(datetime.fromisoformat(text))


def format_timestamp(ts: datetime) -> str:
    return to_utc(ts).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class PredictionEvent:
    """One model's score for one study at one instant."""

    study_id: str
    timestamp: datetime
    model_id: str
    class_label: str
    score: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", to_utc(self.timestamp))
        score = float(self.score)
        if math.isnan(score) or not 0.0 <= score <= 1.0:
            raise ValueError(f"score out of range [0, 1]: {self.score!r}")
        object.__setattr__(self, "score", score)
        for name in ("study_id", "model_id", "class_label"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.study_id, self.model_id, self.class_label)

    @classmethod
    def from_dict(cls, record: dict) -> PredictionEvent:
        missing = [c for c in CSV_COLUMNS if record.get(c) in (None, "")]
        if missing:
            raise ValueError(f"missing column(s): {', '.join(missing)}")
        ts = record["timestamp"]
        if not isinstance(ts, datetime):
            try:
                ts = parse_timestamp(str(ts))
            except ValueError:
                raise ValueError(f"unparsable timestamp: {record['timestamp']!r}") from None
        try:
            score = float(record["score"])
        except (TypeError, ValueError):
            raise ValueError(f"unparsable score: {record['score']!r}") from None
        return cls(
            study_id=str(record["study_id"]),
            timestamp=ts,
            model_id=str(record["model_id"]),
            class_label=str(record["class_label"]),
            score=score,
        )

    def to_row(self) -> list[str]:
        return [
            self.study_id,
            format_timestamp(self.timestamp),
            self.model_id,
            self.class_label,
            repr(self.score),
        ]
