import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intershap.baselines import BaselineScores
from intershap.report import (
    ExplanationReport,
    ForcePlotSpec,
    build_report,
    force_plot_spec,
    parse_force_plot,
    render_force_plot,
)

XOR = [0.5, 0.5, 0.5, 1.0]


def random_values(seed, n=30, M=2):
    return np.random.default_rng(seed).uniform(0, 1, (n, 1 << M))


class TestForcePlot:
    def test_single_arrow(self):
        spec = ForcePlotSpec(0.5, [("M1", 0.5)], 1.0)
        svg = render_force_plot(spec)
        back = parse_force_plot(svg)
        assert back.segments == [("M1", 0.5)]
        assert back.base == 0.5 and back.final == 1.0

    def test_xor_game_single_interaction_arrow(self):
        spec = force_plot_spec(np.array([XOR]), 2)
        assert spec.base == 0.5 and spec.final == 1.0
        assert dict(spec.segments) == {"M1": 0.0, "M2": 0.0, "I": 0.5}

    def test_empty_segments_flat_line(self):
        svg = render_force_plot(ForcePlotSpec(0.4, [], 0.4))
        assert "<polygon" not in svg
        assert 'stroke-width="2"' in svg

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ForcePlotSpec(math.nan, [], 0.0)
        with pytest.raises(ValueError):
            ForcePlotSpec(0.0, [("M1", math.inf)], 0.0)

    def test_deterministic_layout(self):
        spec = force_plot_spec(random_values(1), 2)
        assert render_force_plot(spec, "t") == render_force_plot(spec, "t")

    @given(st.integers(0, 10_000), st.integers(1, 4))
    @settings(max_examples=50, deadline=None)
    def test_telescoping_after_reparse(self, seed, M):
        spec = force_plot_spec(random_values(seed, M=M), M)
        back = parse_force_plot(render_force_plot(spec))
        assert abs(back.residual()) <= 1e-6
        assert [k for k, _ in back.segments] == [f"M{i + 1}" for i in range(M)] + ["I"]


class TestReport:
    def test_round_trip(self):
        vals = random_values(2, n=40)
        anchor = np.random.default_rng(0).integers(0, 2, 40)
        report = build_report(vals, anchor, 2, {"seed": 0}, BaselineScores(emap_gap=1.5), timestamp="t0")
        text = report.to_json()
        back = ExplanationReport.from_json(text)
        assert back.to_json() == text
        assert back.baselines.emap_gap == 1.5

    def test_floats_survive_exactly(self):
        vals = random_values(3)
        report = build_report(vals, np.zeros(30, int), 2, timestamp="")
        back = ExplanationReport.from_json(report.to_json())
        np.testing.assert_array_equal(back.local.per_sample_I, report.local.per_sample_I)
        assert back.global_.intershap == report.global_.intershap

    def test_class_breakdown_partitions(self):
        vals = random_values(4, n=50)
        anchor = np.random.default_rng(1).integers(0, 3, 50)
        report = build_report(vals, anchor, 2, timestamp="")
        assert sum(report.class_counts.values()) == 50
        assert set(report.class_counts) == set(np.unique(anchor).tolist())
        for c, spec in report.class_force_plots.items():
            assert abs(spec.residual()) <= 1e-9

    def test_only_timestamp_differs(self):
        vals = random_values(5)
        a = json.loads(build_report(vals, np.zeros(30, int), 2, {"x": 1}).to_json())
        b = json.loads(build_report(vals, np.zeros(30, int), 2, {"x": 1}, timestamp="other").to_json())
        a.pop("created"), b.pop("created")
        assert a == b

    def test_schema_version_checked(self):
        d = build_report(random_values(6), np.zeros(30, int), 2, timestamp="").to_dict()
        d["schema_version"] = 99
        with pytest.raises(ValueError):
            ExplanationReport.from_dict(d)
