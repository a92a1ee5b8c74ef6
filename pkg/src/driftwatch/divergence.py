"""Score binning, normalization and KL/JS divergence in bits.

Zero-mass policy:

* JS uses the ``0 * log 0 = 0`` convention and is always finite.
* KL is infinite whenever some bin has ``p > 0`` and ``q == 0``, unless
  smoothing is requested explicitly. Smoothing adds ``epsilon`` to every bin
  of both operands and renormalizes before summation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from driftwatch import kernels
from driftwatch.errors import (
    BinningMismatchError,
    ConfigError,
    EmptyWindowError,
    ScoreOutOfDomainError,
)

DEFAULT_BIN_COUNT = 10
DEFAULT_KL_SMOOTHING = 1e-6
MASS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class BinningSpec:
    """Fixed-width bins over ``[domain_low, domain_high]``.

    Scores equal to ``domain_high`` fall in the last bin.
    """

    bin_count: int = DEFAULT_BIN_COUNT
    domain_low: float = 0.0
    domain_high: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "domain_low", float(self.domain_low))
        object.__setattr__(self, "domain_high", float(self.domain_high))
        if isinstance(self.bin_count, bool) or not isinstance(self.bin_count, int):
            raise ConfigError(f"bin_count must be an integer, got {self.bin_count!r}")
        if self.bin_count < 2:
            raise ConfigError(f"bin_count must be >= 2, got {self.bin_count}")
        if not (math.isfinite(self.domain_low) and math.isfinite(self.domain_high)):
            raise ConfigError("binning domain must be finite")
        if not self.domain_low < self.domain_high:
            raise ConfigError(
                f"domain_low ({self.domain_low}) must be < domain_high ({self.domain_high})"
            )

    def index(self, score: float) -> int:
        """Bin index of a single score, same arithmetic as the batch kernel."""
        if not (self.domain_low <= score <= self.domain_high):
            raise ScoreOutOfDomainError(score, None, self)
        idx = int((score - self.domain_low) / (self.domain_high - self.domain_low) * self.bin_count)
        return min(idx, self.bin_count - 1)

    def edges(self) -> np.ndarray:
        return np.linspace(self.domain_low, self.domain_high, self.bin_count + 1)


@dataclass(frozen=True)
class ScoreHistogram:
    binning: BinningSpec
    counts: tuple[int, ...]
    total: int = field(default=-1)

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if len(counts) != self.binning.bin_count:
            raise ValueError(
                f"expected {self.binning.bin_count} counts, got {len(counts)}"
            )
        if any(c < 0 for c in counts):
            raise ValueError("histogram counts must be non-negative")
        if self.total == -1:
            object.__setattr__(self, "total", sum(counts))
        elif self.total != sum(counts):
            raise ValueError(f"total {self.total} != sum of counts {sum(counts)}")

    def __add__(self, other: ScoreHistogram) -> ScoreHistogram:
        if other.binning != self.binning:
            raise BinningMismatchError(self.binning, other.binning)
        return ScoreHistogram(
            self.binning, tuple(a + b for a, b in zip(self.counts, other.counts))
        )


@dataclass(frozen=True)
class ScoreDistribution:
    """Normalized binned distribution of prediction scores over one window."""

    binning: BinningSpec
    mass: tuple[float, ...]
    sample_count: int

    def __post_init__(self) -> None:
        mass = tuple(float(m) for m in self.mass)
        object.__setattr__(self, "mass", mass)
        if self.sample_count <= 0:
            raise EmptyWindowError("a distribution needs at least one sample")
        if len(mass) != self.binning.bin_count:
            raise ValueError(f"expected {self.binning.bin_count} bins, got {len(mass)}")
        if any(not (0.0 <= m <= 1.0) for m in mass):
            raise ValueError(f"bin mass outside [0, 1]: {mass}")
        if abs(math.fsum(mass) - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"mass sums to {math.fsum(mass)!r}, not 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mass, dtype=np.float64)


class DivergenceKind(str, enum.Enum):
    KL = "KL"
    JS = "JS"


@dataclass(frozen=True)
class DivergenceValue:
    """A divergence in bits. ``math.inf`` stands for an infinite KL value."""

    kind: DivergenceKind
    value: float
    smoothed: bool = False

    def __post_init__(self) -> None:
        if math.isnan(self.value) or self.value < 0.0:
            raise ValueError(f"divergence must be non-negative, got {self.value}")
        if self.kind is DivergenceKind.JS and not self.value <= 1.0:
            raise ValueError(f"JS divergence must be <= 1 bit, got {self.value}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def __float__(self) -> float:
        return self.value


def bin_scores(scores: Iterable[float], binning: BinningSpec) -> ScoreHistogram:
    """Count scores per bin.

    Raises:
        ScoreOutOfDomainError: naming the first offending score and its index.
    """
    arr = np.ascontiguousarray(np.fromiter(scores, dtype=np.float64))
    counts = np.zeros(binning.bin_count, dtype=np.int64)
    bad = kernels.bin_counts(arr, binning.domain_low, binning.domain_high, counts)
    if bad >= 0:
        raise ScoreOutOfDomainError(float(arr[bad]), int(bad), binning)
    return ScoreHistogram(binning, tuple(counts.tolist()))


def normalize(hist: ScoreHistogram) -> ScoreDistribution:
    if hist.total == 0:
        raise EmptyWindowError("empty window: cannot normalize a histogram with no samples")
    total = hist.total
    return ScoreDistribution(
        hist.binning, tuple(c / total for c in hist.counts), sample_count=total
    )


def _check_same_binning(p: ScoreDistribution, q: ScoreDistribution) -> None:
    if p.binning != q.binning:
        raise BinningMismatchError(p.binning, q.binning)


def _smooth(mass: np.ndarray, epsilon: float) -> np.ndarray:
    shifted = mass + epsilon
    return np.ascontiguousarray(shifted / shifted.sum())


def kl_divergence(
    p: ScoreDistribution, q: ScoreDistribution, smoothing: float | None = None
) -> DivergenceValue:
    """KL(p || q) in bits.

    Without ``smoothing``, a bin where ``p > 0`` and ``q == 0`` gives an
    infinite value. Note the direction matters: KL is not symmetric.
    """
    _check_same_binning(p, q)
    pa, qa = p.as_array(), q.as_array()
    if smoothing is not None:
        if not (smoothing >= 0.0 and math.isfinite(smoothing)):
            raise ConfigError(f"smoothing epsilon must be a finite value >= 0, got {smoothing}")
        pa, qa = _smooth(pa, smoothing), _smooth(qa, smoothing)
    value = kernels.kl_bits(pa, qa)
    # Rounding can leave a tiny negative residue when p and q nearly coincide.
    return DivergenceValue(DivergenceKind.KL, max(value, 0.0), smoothed=smoothing is not None)


def js_divergence(p: ScoreDistribution, q: ScoreDistribution) -> DivergenceValue:
    """Jensen-Shannon divergence in bits, symmetric and bounded by 1."""
    _check_same_binning(p, q)
    value = kernels.js_bits(p.as_array(), q.as_array())
    return DivergenceValue(DivergenceKind.JS, min(max(value, 0.0), 1.0))


def js_many(
    ps: Sequence[ScoreDistribution], qs: Sequence[ScoreDistribution]
) -> np.ndarray:
    """Vectorized :func:`js_divergence` over aligned pairs."""
    if len(ps) != len(qs):
        raise ValueError("ps and qs must have the same length")
    if not ps:
        return np.zeros(0)
    for p, q in zip(ps, qs):
        _check_same_binning(p, q)
    pm = np.ascontiguousarray([p.mass for p in ps], dtype=np.float64)
    qm = np.ascontiguousarray([q.mass for q in qs], dtype=np.float64)
    out = np.empty(len(ps), dtype=np.float64)
    kernels.js_rows(pm, qm, out)
    return np.clip(out, 0.0, 1.0)
