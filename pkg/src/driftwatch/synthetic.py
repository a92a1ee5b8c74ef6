"""Seeded multi-model prediction streams with controlled drift.

Scores come from a Beta density parameterized by location ``mu`` (the mean)
and concentration ``kappa``. Each (window, model) draws its uniforms from the
seeded generator regardless of profile and maps them through the inverse
CDF, so changing one model's profile leaves every other draw untouched and
a larger shift moves every score further (common random numbers).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Iterator, Mapping

import numpy as np
from scipy.special import betaincinv

from driftwatch.errors import ConfigError
from driftwatch.events import PredictionEvent, format_timestamp, parse_timestamp
from driftwatch.monitor import MonitorConfig
from driftwatch.windowing import WindowSpec, format_duration, parse_duration

PAPER_COHORT_SIZES = (969, 489, 646, 543, 352, 994)
PAPER_WINDOW_LABELS = ("Reference", "Month 1", "Month 2", "Month 3", "Month 4", "Post Covid")
_MU_CLIP = 1e-3


@dataclass(frozen=True)
class ScoreProfile:
    location: float
    concentration: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.location <= 1.0:
            raise ConfigError(f"profile location must lie in [0, 1], got {self.location}")
        if not self.concentration > 0.0:
            raise ConfigError(f"profile concentration must be > 0, got {self.concentration}")

    def shifted(self, delta: float) -> ScoreProfile:
        return replace(self, location=min(max(self.location + delta, 0.0), 1.0))

    def beta_params(self) -> tuple[float, float]:
        mu = min(max(self.location, _MU_CLIP), 1.0 - _MU_CLIP)
        return mu * self.concentration, (1.0 - mu) * self.concentration

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        a, b = self.beta_params()
        return np.clip(betaincinv(a, b, uniforms), 0.0, 1.0)


@dataclass(frozen=True)
class Phase:
    windows: int
    studies_per_window: int | tuple[int, ...]
    overrides: Mapping[str, ScoreProfile] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.windows < 1:
            raise ConfigError("a phase needs at least one window")
        sizes = self.sizes()
        if len(sizes) != self.windows:
            raise ConfigError(
                f"phase lists {len(sizes)} window sizes for {self.windows} windows"
            )
        if any(n < 1 for n in sizes):
            raise ConfigError("studies per window must be >= 1")

    def sizes(self) -> tuple[int, ...]:
        if isinstance(self.studies_per_window, int):
            return (self.studies_per_window,) * self.windows
        return tuple(self.studies_per_window)


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    models: tuple[tuple[str, ScoreProfile], ...]
    phases: tuple[Phase, ...]
    window_duration: timedelta = timedelta(days=30)
    origin: datetime = datetime(2020, 1, 1, tzinfo=timezone.utc)
    class_label: str = "consolidation"
    window_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ConfigError("scenario needs at least one phase")
        if not self.models:
            raise ConfigError("scenario needs at least one model")
        ids = [m for m, _ in self.models]
        if len(set(ids)) != len(ids):
            raise ConfigError("model ids must be distinct")
        for phase in self.phases:
            unknown = set(phase.overrides) - set(ids)
            if unknown:
                raise ConfigError(f"overrides for unknown model(s): {sorted(unknown)}")
        if self.window_duration <= timedelta(0):
            raise ConfigError("window duration must be positive")

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.models)

    def window_sizes(self) -> list[int]:
        return [n for phase in self.phases for n in phase.sizes()]

    def window_spec(self, min_samples: int = 100) -> WindowSpec:
        return WindowSpec(self.window_duration, self.origin, min_samples, self.window_labels)

    @classmethod
    def from_dict(cls, doc: Mapping) -> ScenarioSpec:
        try:
            models = tuple(
                (str(m["id"]), ScoreProfile(float(m["location"]), float(m["concentration"])))
                for m in doc["models"]
            )
            phases = []
            for p in doc["phases"]:
                spw = p["studies_per_window"]
                phases.append(
                    Phase(
                        int(p.get("windows", 1)),
                        spw if isinstance(spw, int) else tuple(int(n) for n in spw),
                        {
                            k: ScoreProfile(float(v["location"]), float(v["concentration"]))
                            for k, v in p.get("overrides", {}).items()
                        },
                    )
                )
            kwargs = {}
            if "window_duration" in doc:
                kwargs["window_duration"] = parse_duration(doc["window_duration"])
            if "origin" in doc:
                kwargs["origin"] = parse_timestamp(doc["origin"])
            if "class_label" in doc:
                kwargs["class_label"] = str(doc["class_label"])
            if "window_labels" in doc:
                kwargs["window_labels"] = tuple(doc["window_labels"])
            return cls(int(doc["seed"]), models, tuple(phases), **kwargs)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid scenario spec: {exc!r}") from None

    @classmethod
    def load(cls, path) -> ScenarioSpec:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"scenario spec is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("scenario spec must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        def prof(p: ScoreProfile) -> dict:
            return {"location": p.location, "concentration": p.concentration}

        return {
            "seed": self.seed,
            "models": [{"id": m, **prof(p)} for m, p in self.models],
            "phases": [
                {
                    "windows": ph.windows,
                    "studies_per_window": (
                        ph.studies_per_window
                        if isinstance(ph.studies_per_window, int)
                        else list(ph.studies_per_window)
                    ),
                    "overrides": {k: prof(v) for k, v in ph.overrides.items()},
                }
                for ph in self.phases
            ],
            "window_duration": format_duration(self.window_duration),
            "origin": format_timestamp(self.origin),
            "class_label": self.class_label,
            "window_labels": list(self.window_labels),
        }


def generate(spec: ScenarioSpec) -> Iterator[PredictionEvent]:
    """Yield events in timestamp order: one event per model per study."""
    rng = np.random.default_rng(spec.seed)
    base = dict(spec.models)
    w = 0
    for phase in spec.phases:
        profiles = {m: phase.overrides.get(m, base[m]) for m in spec.model_ids}
        for n in phase.sizes():
            start = spec.origin + w * spec.window_duration
            scores = {m: profiles[m].sample(rng.random(n)).tolist() for m in spec.model_ids}
            for i in range(n):
                ts = start + spec.window_duration * (2 * i + 1) / (2 * n)
                sid = f"w{w:03d}-s{i:05d}"
                for m in spec.model_ids:
                    yield PredictionEvent(sid, ts, m, spec.class_label, scores[m][i])
            w += 1


def generate_scores(
    profile: ScoreProfile, n: int, seed: int
) -> np.ndarray:
    """Scores for a single profile, same uniform stream as :func:`generate` uses."""
    return profile.sample(np.random.default_rng(seed).random(n))


# Baseline: the main model and first support agree closely while the second
# support scores systematically higher. The final phase moves every model
# upward by different amounts.
_PAPER_BASE = (
    ("AI1", ScoreProfile(0.25, 6.0)),
    ("AI2", ScoreProfile(0.28, 6.0)),
    ("AI3", ScoreProfile(0.55, 4.0)),
)
_PAPER_SHIFTED = {
    "AI1": ScoreProfile(0.50, 6.0),
    "AI2": ScoreProfile(0.72, 7.0),
    "AI3": ScoreProfile(0.75, 5.0),
}


def paper_shaped_scenario(seed: int = 42) -> ScenarioSpec:
    """Six checkpoints sized like the retrospective cohort: five stable, one shifted."""
    stable = Phase(5, PAPER_COHORT_SIZES[:5])
    shifted = Phase(1, PAPER_COHORT_SIZES[5], _PAPER_SHIFTED)
    return ScenarioSpec(
        seed=seed,
        models=_PAPER_BASE,
        phases=(stable, shifted),
        window_labels=PAPER_WINDOW_LABELS,
    )


def config_for(
    spec: ScenarioSpec,
    main_model: str | None = None,
    **overrides,
) -> MonitorConfig:
    """A monitor config whose windows line up with ``spec``'s windows."""
    ids = spec.model_ids
    main = main_model or ids[0]
    return MonitorConfig(
        main_model=main,
        support_models=tuple(m for m in ids if m != main),
        window=spec.window_spec(overrides.pop("min_samples", 100)),
        **overrides,
    )


def shift_models(spec: ScenarioSpec, deltas: Mapping[str, float], from_phase: int) -> ScenarioSpec:
    """Copy of ``spec`` with location shifts applied to phases ``from_phase`` onward."""
    base = dict(spec.models)
    phases: list[Phase] = []
    for i, phase in enumerate(spec.phases):
        if i < from_phase:
            phases.append(phase)
            continue
        ov = dict(phase.overrides)
        for m, d in deltas.items():
            ov[m] = ov.get(m, base[m]).shifted(d)
        phases.append(replace(phase, overrides=ov))
    return replace(spec, phases=tuple(phases))

