from __future__ import annotations

from datetime import timedelta
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import attribute_brute_force, js_bits_exact
from conftest import ORIGIN, TEN_BINS, dist, random_dist
from driftwatch.divergence import (
    BinningSpec,
    DivergenceKind,
    DivergenceValue,
    bin_scores,
    js_divergence,
    normalize,
)
from driftwatch.errors import AttributionError, ConfigError, MainModelAbsentError, NoBaselineError
from driftwatch.monitor import (
    BASELINE,
    INCONCLUSIVE,
    Alert,
    DivergenceReading,
    Metric,
    MonitorConfig,
    Severity,
    attribute_suspect,
    evaluate_window,
    predictive_alert,
    predictive_divergence,
    temporal_alert,
    temporal_stability,
)
from driftwatch.windowing import BaselineMode, BaselineSpec, Insufficient, WindowSpec

# Table 1 and Table 2 of the retrospective study (JS divergence values).
TABLE1_REFERENCE = {("AI1", "AI2"): 0.116, ("AI1", "AI3"): 0.547, ("AI2", "AI3"): 0.590}
TABLE1_POST_COVID = {("AI1", "AI2"): 0.272, ("AI1", "AI3"): 0.173, ("AI2", "AI3"): 0.228}
TABLE2_AI1_POST_COVID = 0.435
TABLE2_AI1_M4_M3 = 0.105
ONE_DAY = timedelta(days=1)


def js(v):
    return DivergenceValue(DivergenceKind.JS, v)


def readings_from(values, window):
    return [
        DivergenceReading(Metric.PREDICTIVE, a, b, window, js(v)) for (a, b), v in values.items()
    ]


@pytest.fixture
def window(window_spec):
    return window_spec.window(0)


class TestConfig:
    def test_round_trip(self, config):
        again = MonitorConfig.from_dict(config.to_dict())
        assert again == config and again.digest() == config.digest()

    def test_digest_sensitive_to_bins(self, config):
        doc = config.to_dict()
        doc["bin_count"] = 20
        assert MonitorConfig.from_dict(doc).digest() != config.digest()

    @pytest.mark.parametrize(
        "change",
        [
            {"support_models": ["AI1"]},
            {"support_models": []},
            {"support_models": ["AI2", "AI2"]},
            {"predictive_threshold": 0.0},
            {"temporal_threshold": 1.5},
            {"bin_count": 1},
            {"baseline_mode": "ewma"},
            {"surprise": 1},
            {"kl_smoothing": -1},
        ],
    )
    def test_invalid(self, config, change):
        doc = {**config.to_dict(), **change}
        with pytest.raises(ConfigError):
            MonitorConfig.from_dict(doc)

    def test_defaults(self, config):
        assert config.predictive_threshold == 0.20
        assert config.temporal_threshold == 0.10
        assert config.baseline.mode is BaselineMode.PREVIOUS_WINDOW
        assert config.binning == BinningSpec(10)
        assert config.window.min_samples == 100


class TestPredictive:
    def test_identical(self, config, window, rng):
        d = random_dist(rng)
        out = predictive_divergence({"AI1": d, "AI2": d, "AI3": d}, config, window)
        assert [r.pair for r in out] == ["AI1-AI2", "AI1-AI3", "AI2-AI3"]
        assert all(r.value.value == 0.0 for r in out)

    def test_disjoint(self, config, window):
        a = dist(*([1.0] + [0.0] * 9))
        b = dist(*([0.0] * 9 + [1.0]))
        out = predictive_divergence({"AI1": a, "AI2": b}, config, window)
        assert len(out) == 1 and out[0].value.value == 1.0

    def test_insufficient_skipped(self, config, window, rng):
        d = random_dist(rng)
        out = predictive_divergence({"AI1": d, "AI2": Insufficient(3, 100), "AI3": d}, config, window)
        assert [r.pair for r in out] == ["AI1-AI3"]

    def test_main_absent(self, config, window, rng):
        d = random_dist(rng)
        with pytest.raises(MainModelAbsentError, match="main model absent"):
            predictive_divergence({"AI2": d, "AI3": d}, config, window)

    def test_reference_point_fixture(self, window):
        alert = predictive_alert(readings_from(TABLE1_REFERENCE, window), 0.20)
        assert {r.pair for r in alert.readings} == {"AI1-AI3", "AI2-AI3"}
        assert alert.suspect == "AI3"
        assert alert.severity is Severity.CRITICAL  # 0.590 >= 2 * 0.20

    def test_post_covid_fixture(self, window):
        alert = predictive_alert(readings_from(TABLE1_POST_COVID, window), 0.20)
        assert {r.pair for r in alert.readings} == {"AI1-AI2", "AI2-AI3"}
        assert alert.suspect == "AI2"
        assert alert.severity is Severity.WARN


class TestAttribution:
    def test_post_covid(self, window):
        assert attribute_suspect(readings_from(TABLE1_POST_COVID, window), 0.20) == "AI2"

    def test_all_exceed(self, window):
        values = {k: 0.5 for k in TABLE1_POST_COVID}
        assert attribute_suspect(readings_from(values, window), 0.20) == INCONCLUSIVE

    def test_none_exceed(self, window):
        assert predictive_alert(readings_from({("AI1", "AI2"): 0.1}, window), 0.2) is None

    def test_single_pair_is_ambiguous(self, window):
        assert attribute_suspect(readings_from({("AI1", "AI2"): 0.5}, window), 0.2) == INCONCLUSIVE

    def test_empty(self):
        with pytest.raises(AttributionError, match="nothing to attribute"):
            attribute_suspect([], 0.2)

    @settings(max_examples=500, deadline=None)
    @given(
        n=st.integers(2, 6),
        data=st.data(),
        threshold=st.sampled_from([0.1, 0.2, 0.5]),
    )
    def test_matches_brute_force(self, n, data, threshold):
        models = [f"M{i}" for i in range(n)]
        pairs = list(combinations(models, 2))
        values = data.draw(st.lists(st.sampled_from([0.0, 0.05, 0.1, 0.2, 0.3, 0.7]),
                                    min_size=len(pairs), max_size=len(pairs)))
        readings = readings_from(dict(zip(pairs, values)), WindowSpec(ONE_DAY, ORIGIN).window(0))
        assert attribute_suspect(readings, threshold) == attribute_brute_force(readings, threshold)


class TestTemporal:
    def test_equal_to_baseline(self, config, window, rng):
        d = random_dist(rng)
        r = temporal_stability("AI1", d, [d], config, window)
        assert r.value.value == 0.0 and r.model_b == BASELINE and r.metric is Metric.TEMPORAL

    def test_bootstrap(self, config, window, rng):
        with pytest.raises(NoBaselineError, match="bootstrap"):
            temporal_stability("AI1", random_dist(rng), [], config, window)

    def test_month_over_month_chain(self, config, window_spec, rng):
        months = [random_dist(rng) for _ in range(5)]
        for i in range(1, 5):
            r = temporal_stability("AI1", months[i], months[:i], config, window_spec.window(i))
            assert r.value == js_divergence(months[i], months[i - 1])

    def test_moving_average_depth(self, window_spec, rng):
        cfg = MonitorConfig("A", ("B",), window_spec,
                            baseline=BaselineSpec(BaselineMode.MOVING_AVERAGE, 2))
        h = [dist(0.2, 0.8), dist(0.4, 0.6), dist(0.6, 0.4)]
        cur = dist(0.9, 0.1)
        r = temporal_stability("A", cur, h, cfg, window_spec.window(3))
        expected = float(js_bits_exact(cur.mass, [0.5, 0.5]))
        assert r.value.value == pytest.approx(expected, abs=1e-12)

    def test_beta_shift_increasing(self, config, window):
        # Oracle: fixed-seed Beta(2,5) scores, mean-shifted and clipped, binned,
        # and compared with the 60-digit JS evaluation.
        base_scores = np.random.default_rng(7).beta(2, 5, size=2000)
        base = normalize(bin_scores(base_scores, TEN_BINS))
        values = []
        for delta in (0.0, 0.05, 0.1, 0.2, 0.3):
            shifted = normalize(bin_scores(np.clip(base_scores + delta, 0, 1), TEN_BINS))
            got = temporal_stability("AI1", shifted, [base], config, window).value.value
            assert got == pytest.approx(float(js_bits_exact(shifted.mass, base.mass)), abs=1e-12)
            values.append(got)
        assert values[0] == 0.0
        assert all(a < b for a, b in zip(values, values[1:]))


class TestEvaluateWindow:
    def test_stable(self, config, window_spec, rng):
        d = random_dist(rng)
        hist = {m: [d] for m in config.models}
        ev = evaluate_window(window_spec.window(1), {m: d for m in config.models}, hist, config)
        assert len(ev.readings) == 3 + 3
        assert ev.alerts == []

    def test_temporal_fixtures(self, window):
        crit = temporal_alert(
            DivergenceReading(Metric.TEMPORAL, "AI1", BASELINE, window, js(TABLE2_AI1_POST_COVID)), 0.10
        )
        warn = temporal_alert(
            DivergenceReading(Metric.TEMPORAL, "AI1", BASELINE, window, js(TABLE2_AI1_M4_M3)), 0.10
        )
        assert crit.severity is Severity.CRITICAL and crit.suspect == "AI1"
        assert warn.severity is Severity.WARN
        quiet = DivergenceReading(Metric.TEMPORAL, "AI2", BASELINE, window, js(0.070))
        assert temporal_alert(quiet, 0.10) is None

    def test_reading_counts_and_soundness(self, config, window_spec, rng):
        for _ in range(50):
            cur = {m: random_dist(rng, sparse=True) for m in config.models}
            hist = {m: [random_dist(rng, sparse=True)] for m in config.models if rng.random() < 0.7}
            ev = evaluate_window(window_spec.window(2), cur, hist, config)
            pred = [r for r in ev.readings if r.metric is Metric.PREDICTIVE]
            temp = [r for r in ev.readings if r.metric is Metric.TEMPORAL]
            assert len(pred) == 3 and len(temp) == len(hist)
            assert sum(a.metric is Metric.PREDICTIVE for a in ev.alerts) <= 1
            flagged = {(a.metric, r.pair) for a in ev.alerts for r in a.readings}
            for r in ev.readings:
                thr = config.predictive_threshold if r.metric is Metric.PREDICTIVE else config.temporal_threshold
                assert (r.value.value > thr) == ((r.metric, r.pair) in flagged)
            again = evaluate_window(window_spec.window(2), cur, hist, config)
            assert again == ev

    def test_coverage_notes(self, config, window_spec, rng):
        d = random_dist(rng)
        ev = evaluate_window(window_spec.window(0), {"AI2": d, "AI3": Insufficient(5, 100)}, {}, config)
        assert any("main model absent" in n for n in ev.notes)
        assert any("AI3 insufficient" in n for n in ev.notes)
        assert ev.alerts == []

    def test_kl_side_value(self, window_spec):
        cfg = MonitorConfig("A", ("B",), window_spec, kl_smoothing=1e-6)
        a = dist(*([1.0] + [0.0] * 9))
        b = dist(*([0.0] * 9 + [1.0]))
        ev = evaluate_window(window_spec.window(0), {"A": a, "B": b}, {}, cfg)
        r = ev.readings[0]
        assert r.kl.smoothed and r.kl.value > 10 and r.value.value == 1.0


def test_alert_rejects_non_exceeding(window):
    r = DivergenceReading(Metric.TEMPORAL, "AI1", BASELINE, window, js(0.05))
    with pytest.raises(ValueError):
        Alert(window, Metric.TEMPORAL, (r,), "AI1", 0.10, Severity.WARN)


def test_reading_invariants(window):
    with pytest.raises(ValueError):
        DivergenceReading(Metric.PREDICTIVE, "AI1", "AI1", window, js(0.1))
    with pytest.raises(ValueError):
        DivergenceReading(Metric.TEMPORAL, "AI1", "AI2", window, js(0.1))
