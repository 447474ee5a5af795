"""Unit tests for artifact generation."""

import numpy as np
import pandas as pd
import pytest

from skillbasis.continuous import EpochMetrics
from skillbasis.exceptions import ConfigurationError
from skillbasis.generator import (
    MotionFieldSvgGenerator,
    effective_dimension_table,
    matrix_table,
    metrics_table,
    motion_fields_document,
    render_motion_field_svg,
    report_document,
    reward_table,
    state_action_labels,
    timeline_table,
    variance_table,
    write_table,
)
from skillbasis.models import EffectiveDimension, MotionField
from tests.fixtures.builders import small_energy_model


@pytest.fixture
def field() -> MotionField:
    """Motion field of two parts moving right."""
    return MotionField(
        skill_index=1,
        mean_state=np.array([0.0, 0.0, 1.0, 1.0]),
        mean_action=np.array([0.5, 0.0, 0.5, 0.0]),
        support_size=10,
    )


class TestTables:
    """Unit tests for the plot-ready tables."""

    def test_state_action_labels(self):
        """Test labels with and without action names."""
        assert state_action_labels(2, 2) == ["s0:0", "s0:1", "s1:0", "s1:1"]
        assert state_action_labels(1, 2, ("up", "down")) == ["s0:up", "s0:down"]

    def test_matrix_table(self):
        """Test the heatmap layout."""
        frame = matrix_table(np.eye(2), ["a", "b"], column_prefix="pc")
        assert list(frame.columns) == ["row", "pc_0", "pc_1"]
        assert frame["row"].tolist() == ["a", "b"]

    def test_matrix_table_label_mismatch(self):
        """Test that every row needs a label."""
        with pytest.raises(ConfigurationError, match="row labels"):
            matrix_table(np.eye(2), ["a"])

    def test_reward_table(self):
        """Test the long reward layout."""
        true = np.arange(8.0).reshape(2, 2, 2)
        frame = reward_table(true, true + 1.0, ["water", "home"])
        assert len(frame) == 8
        row = frame.iloc[5]
        assert (row["task"], row["state"], row["action"]) == ("home", 0, 1)
        assert row["recovered_reward"] == row["true_reward"] + 1.0

    def test_variance_table(self):
        """Test the running total."""
        frame = variance_table(np.array([0.5, 0.3, 0.1]))
        np.testing.assert_allclose(frame["cumulative"], [0.5, 0.8, 0.9])

    def test_effective_dimension_table(self):
        """Test that both matrices are stacked."""
        pre = EffectiveDimension(np.array([3, 1]), np.array([0.2, 0.2]), 2.0, 2.0)
        post = EffectiveDimension(np.array([1, 1]), np.array([0.1, 0.1]), 1.0, 1.0)
        frame = effective_dimension_table({"pre": pre, "post": post})
        assert frame["matrix"].tolist() == ["pre", "pre", "post", "post"]
        assert frame["count"].tolist() == [3, 1, 1, 1]

    def test_timeline_table(self, rng):
        """Test bin starts of a binned timeline."""
        model = small_energy_model(rng, n_bins=3)
        model.t_min, model.time_bin_width = 10, 4
        frame = timeline_table(model)
        assert frame["t_start"].tolist() == [10, 14, 18]
        assert list(frame.columns) == ["bin", "t_start", "u_0", "u_1", "u_2"]

    def test_metrics_table_keeps_missing_auc(self):
        """Test that epochs without AUC stay empty."""
        frame = metrics_table(
            [
                EpochMetrics("transition", 1, 1.2, None, 0.05),
                EpochMetrics("policy", 1, 1.0, 0.7, 0.05),
            ]
        )
        assert pd.isna(frame["auc"].iloc[0])
        assert frame["auc"].iloc[1] == pytest.approx(0.7)

    def test_write_table(self, temp_dir):
        """Test the CSV text."""
        path = temp_dir / "out" / "t.csv"
        write_table(pd.DataFrame({"x": [0.1], "n": [pd.NA]}), path)
        assert path.read_text() == "x,n\n0.10000000000000001,\n"


class TestMotionFieldOutput:
    """Unit tests for motion-field documents and SVGs."""

    def test_document_with_parts(self, field):
        """Test per-part points and arrows."""
        doc = motion_fields_document([field], ["nose", "tail"])
        assert doc["format"] == "motion-field.v1"
        parts = doc["fields"][0]["parts"]
        assert parts[1] == {"name": "tail", "point": [1.0, 1.0], "arrow": [0.5, 0.0]}

    def test_document_without_parts(self, field):
        """Test that non-pose data has no part entries."""
        doc = motion_fields_document([field], [])
        assert "parts" not in doc["fields"][0]

    def test_svg(self, field):
        """Test that the SVG has one point and one arrow per part."""
        svg = render_motion_field_svg(field, ["nose", "tail"])
        assert svg.startswith("<svg")
        assert svg.rstrip().endswith("</svg>")
        assert svg.count("<circle") == 2
        assert svg.count("<line") == 2
        assert ">tail</text>" in svg
        assert "skill 1" in svg

    def test_svg_stays_inside_canvas(self, field):
        """Test that coordinates are projected into the margins."""
        generator = MotionFieldSvgGenerator(size=100, margin=10)
        svg = generator.generate(field)
        for line in svg.splitlines():
            if line.startswith("<circle"):
                cx = float(line.split('cx="')[1].split('"')[0])
                assert 10.0 <= cx <= 90.0

    def test_svg_needs_points(self):
        """Test that an odd dimension cannot be drawn."""
        odd = MotionField(0, np.zeros(3), np.zeros(3), 1)
        with pytest.raises(ConfigurationError, match="points"):
            render_motion_field_svg(odd)


def test_report_document():
    """Test the report header fields."""
    doc = report_document("gridworld", 7, skills={"rank_d": 4})
    assert doc == {
        "format": "report.v1",
        "command": "gridworld",
        "seed": 7,
        "skills": {"rank_d": 4},
    }
