"""Artifact generation: plot-ready CSV tables, motion-field SVGs and report documents."""

from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from mkdocs.plugins import get_plugin_logger

from .continuous import EnergyModel, EpochMetrics
from .exceptions import ConfigurationError
from .models import EffectiveDimension, FloatArray, MotionField
from .parser import FLOAT_FORMAT

logger = get_plugin_logger(__name__)


def write_table(frame: pd.DataFrame, path: Path) -> None:
    """
    Write a table as CSV with 17 significant digits and no index column.

    Args:
        frame: Table to write.
        path: Target file.

    """
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")


def state_action_labels(
    n_states: int, n_actions: int, action_names: Sequence[str] = ()
) -> list[str]:
    """Row labels ``s<state>:<action>`` of a flattened ``(s, a)`` axis."""
    names = list(action_names) or [str(a) for a in range(n_actions)]
    return [f"s{s}:{names[a]}" for s in range(n_states) for a in range(n_actions)]


def matrix_table(
    matrix: FloatArray, row_labels: Sequence[str], column_prefix: str = "skill"
) -> pd.DataFrame:
    """
    Lay a matrix out as a heatmap table.

    Args:
        matrix: Values ``(rows, columns)``.
        row_labels: One label per row.
        column_prefix: Column names are ``<prefix>_<j>``.

    Returns:
        Table with a ``row`` label column followed by one column per matrix column.

    Raises:
        ConfigurationError: If the label count does not match the rows.

    """
    if len(row_labels) != matrix.shape[0]:
        raise ConfigurationError(
            f"{len(row_labels)} row labels for a matrix with {matrix.shape[0]} rows"
        )
    frame = pd.DataFrame(
        matrix, columns=[f"{column_prefix}_{j}" for j in range(matrix.shape[1])]
    )
    frame.insert(0, "row", list(row_labels))
    return frame


def reward_table(
    true_rewards: FloatArray, recovered: FloatArray, task_names: Sequence[str]
) -> pd.DataFrame:
    """Long table of true and recovered rewards, one row per ``(task, s, a)``."""
    tasks, states, actions = np.indices(true_rewards.shape)
    return pd.DataFrame(
        {
            "task": [task_names[t] for t in tasks.ravel()],
            "state": states.ravel(),
            "action": actions.ravel(),
            "true_reward": true_rewards.ravel(),
            "recovered_reward": recovered.ravel(),
        }
    )


def variance_table(ratios: FloatArray) -> pd.DataFrame:
    """Explained variance per principal component with its running total."""
    return pd.DataFrame(
        {
            "component": np.arange(ratios.size),
            "explained_variance_ratio": ratios,
            "cumulative": np.cumsum(ratios),
        }
    )


def effective_dimension_table(results: dict[str, EffectiveDimension]) -> pd.DataFrame:
    """
    Per-skill effective dimensions of several matrices with their summaries.

    Args:
        results: Effective dimension per matrix name (e.g. ``pre``, ``post``).

    Returns:
        Table with columns ``matrix, skill, count, threshold, mean, median``.

    """
    frames = [
        pd.DataFrame(
            {
                "matrix": name,
                "skill": np.arange(result.counts.size),
                "count": result.counts,
                "threshold": result.threshold,
                "mean": result.mean,
                "median": result.median,
            }
        )
        for name, result in results.items()
    ]
    return pd.concat(frames, ignore_index=True)


def timeline_table(model: EnergyModel) -> pd.DataFrame:
    """Weight timeline with the first time index of every bin."""
    frame = pd.DataFrame(
        model.u_timeline, columns=[f"u_{j}" for j in range(model.u_timeline.shape[1])]
    )
    frame.insert(0, "t_start", model.t_min + np.arange(model.n_bins) * model.time_bin_width)
    frame.insert(0, "bin", np.arange(model.n_bins))
    return frame


def metrics_table(metrics: Sequence[EpochMetrics]) -> pd.DataFrame:
    """Training metrics, one row per epoch or round."""
    return pd.DataFrame(
        {
            "stage": [m.stage for m in metrics],
            "epoch": [m.epoch for m in metrics],
            "loss": [m.loss for m in metrics],
            "auc": pd.array([m.auc for m in metrics], dtype="Float64"),
            "lr": [m.lr for m in metrics],
        }
    )


def motion_fields_document(
    fields: Sequence[MotionField], part_names: Sequence[str]
) -> dict[str, Any]:
    """
    JSON document of motion fields with per-part skeleton points and arrows.

    Args:
        fields: Motion fields to export.
        part_names: Body part labels; may be empty for non-pose data.

    Returns:
        A ``motion-field.v1`` document.

    """
    entries = []
    for field in fields:
        entry = field.to_dict()
        if part_names and field.mean_state.size == 2 * len(part_names):
            points = field.mean_state.reshape(-1, 2)
            arrows = field.mean_action.reshape(-1, 2)
            entry["parts"] = [
                {"name": name, "point": p.tolist(), "arrow": v.tolist()}
                for name, p, v in zip(part_names, points, arrows, strict=True)
            ]
        entries.append(entry)
    return {"format": "motion-field.v1", "fields": entries}


class MotionFieldSvgGenerator:
    """Render one motion field as a standalone SVG: skeleton points with displacement arrows."""

    def __init__(self, size: int = 400, margin: int = 30, arrow_scale: float = 1.0):
        """Initialize the canvas settings.

        Args:
            size: Width and height of the image in pixels.
            margin: Empty border in pixels.
            arrow_scale: Factor applied to the displacement arrows.
        """
        self.size = size
        self.margin = margin
        self.arrow_scale = arrow_scale
        self.lines: list[str] = []

    def generate(self, field: MotionField, part_names: Sequence[str] = ()) -> str:
        """Generate the SVG document.

        Args:
            field: Motion field with x and y interleaved per body part.
            part_names: Optional labels drawn next to the points.

        Returns:
            SVG text.

        Raises:
            ConfigurationError: If the state does not hold (x, y) pairs.
        """
        if field.mean_state.size % 2 or field.mean_state.size != field.mean_action.size:
            raise ConfigurationError(
                f"Motion field of dimension {field.mean_state.size} is not a set of (x, y) points"
            )
        points = field.mean_state.reshape(-1, 2)
        tips = points + self.arrow_scale * field.mean_action.reshape(-1, 2)
        to_canvas = self._projection(np.vstack([points, tips]))

        self.lines = []
        self._add_header(field)
        self._add_skeleton(to_canvas(points))
        self._add_arrows(to_canvas(points), to_canvas(tips))
        self._add_points(to_canvas(points), part_names)
        self.lines.append("</svg>")
        return "\n".join(self.lines) + "\n"

    def _projection(self, everything: FloatArray) -> Any:
        """Map data coordinates into the canvas, keeping the aspect ratio."""
        low = everything.min(axis=0)
        span = float(np.max(everything.max(axis=0) - low))
        scale = (self.size - 2 * self.margin) / (span if span > 0 else 1.0)

        def project(xy: FloatArray) -> FloatArray:
            return self.margin + (xy - low) * scale

        return project

    def _add_header(self, field: MotionField) -> None:
        """Add the root element, arrow marker and title."""
        self.lines.extend(
            [
                f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.size}" '
                f'height="{self.size}" viewBox="0 0 {self.size} {self.size}">',
                f"<title>skill {field.skill_index} (top {field.support_size} rows)</title>",
                "<defs>",
                '<marker id="head" markerWidth="8" markerHeight="8" refX="6" refY="3" '
                'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#d32f2f"/></marker>',
                "</defs>",
                f'<rect width="{self.size}" height="{self.size}" fill="#ffffff"/>',
            ]
        )

    def _add_skeleton(self, points: FloatArray) -> None:
        """Connect consecutive body parts."""
        if len(points) < 2:
            return
        coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in points)
        self.lines.append(
            f'<polyline points="{coords}" fill="none" stroke="#9e9e9e" stroke-width="1.5"/>'
        )

    def _add_arrows(self, points: FloatArray, tips: FloatArray) -> None:
        """Add one displacement arrow per body part."""
        for (x0, y0), (x1, y1) in zip(points, tips, strict=True):
            self.lines.append(
                f'<line x1="{x0:.3f}" y1="{y0:.3f}" x2="{x1:.3f}" y2="{y1:.3f}" '
                'stroke="#d32f2f" stroke-width="2" marker-end="url(#head)"/>'
            )

    def _add_points(self, points: FloatArray, part_names: Sequence[str]) -> None:
        """Add the skeleton points and their labels."""
        labels = list(part_names) if len(part_names) == len(points) else []
        for i, (x, y) in enumerate(points):
            self.lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="4" fill="#1976d2"/>')
            if labels:
                self.lines.append(
                    f'<text x="{x + 6:.3f}" y="{y - 6:.3f}" font-size="10" '
                    f'font-family="sans-serif">{labels[i]}</text>'
                )


def render_motion_field_svg(
    field: MotionField, part_names: Sequence[str] = (), arrow_scale: float = 1.0
) -> str:
    """Render a motion field as standalone SVG text.

    Args:
        field: Motion field with x and y interleaved per body part.
        part_names: Optional point labels.
        arrow_scale: Factor applied to the displacement arrows.

    Returns:
        SVG document.
    """
    return MotionFieldSvgGenerator(arrow_scale=arrow_scale).generate(field, part_names)


def report_document(command: str, seed: int, **sections: Any) -> dict[str, Any]:
    """
    Assemble a ``report.v1`` document.

    Reports carry no timestamps or paths of the machine they ran on, so
    reruns with the same settings are byte-identical.

    Args:
        command: Command that produced the report.
        seed: Root seed of the run.
        **sections: Named report sections.

    Returns:
        The report.

    """
    return {"format": "report.v1", "command": command, "seed": seed, **sections}
