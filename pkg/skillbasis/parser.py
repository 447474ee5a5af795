"""Readers and writers for the versioned file formats of skillbasis."""

import json
import re
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from mkdocs.plugins import get_plugin_logger

from .exceptions import DataError, FormatVersionError, MissingArtifactError
from .models import Dataset, KeypointRecording

logger = get_plugin_logger(__name__)

DATASET_HEADER = re.compile(r"^# dataset\.v1(?: dt=(?P<dt>\S+))?\s*$")
POSE_HEADER = "# pose.v1"
FLOAT_FORMAT = "%.17g"


def dumps_document(document: dict[str, Any]) -> str:
    """
    Serialize a JSON document deterministically.

    Keys are sorted, indentation is two spaces and the text ends with a
    newline, so equal documents give byte-identical files.

    Args:
        document: JSON-compatible dictionary.

    Returns:
        The serialized text.

    Raises:
        DataError: If the document holds NaN, infinities or unsupported types.

    """
    try:
        return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"
    except (TypeError, ValueError) as e:
        raise DataError(f"Cannot serialize document: {e}") from e


def write_document(path: Path, document: dict[str, Any]) -> None:
    """
    Write a JSON document, creating parent directories.

    Args:
        path: Target file.
        document: JSON-compatible dictionary.

    """
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_document(document), encoding="utf-8")
    logger.debug(f"Wrote {path}")


def read_document(path: Path, expected_format: str | None = None) -> dict[str, Any]:
    """
    Read a JSON document and check its version header.

    Args:
        path: File to read.
        expected_format: Required value of the ``format`` key, if any.

    Returns:
        The parsed document.

    Raises:
        MissingArtifactError: If the file does not exist.
        DataError: If the file is not a JSON object.
        FormatVersionError: If the format differs from ``expected_format``.

    """
    if not path.is_file():
        raise MissingArtifactError(f"Required file '{path}' does not exist")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"'{path}' is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise DataError(f"'{path}' must hold a JSON object")
    if expected_format is not None and document.get("format") != expected_format:
        raise FormatVersionError(
            f"'{path}' has format {document.get('format')!r}, expected {expected_format!r}"
        )
    return document


def _continuous_columns(prefix: str, width: int) -> list[str]:
    return [f"{prefix}_{i}" for i in range(width)]


def dataset_to_frame(dataset: Dataset) -> pd.DataFrame:
    """
    Lay a dataset out as a table, one row per transition.

    Discrete columns: ``episode, t, state, action, next_state, task``.
    Continuous columns: ``episode, t, s_*, a_*, n_*, task``. Missing time or
    task values are nullable integers.

    Args:
        dataset: Dataset to convert.

    Returns:
        The table.

    """
    n = len(dataset)
    columns: dict[str, Any] = {
        "episode": dataset.episodes,
        "t": pd.array(
            [pd.NA] * n if dataset.time_index is None else dataset.time_index, dtype="Int64"
        ),
    }
    if dataset.is_discrete:
        columns.update(
            state=dataset.states, action=dataset.actions, next_state=dataset.next_states
        )
    else:
        blocks = (("s", dataset.states), ("a", dataset.actions), ("n", dataset.next_states))
        for prefix, values in blocks:
            matrix = np.atleast_2d(values.T).T
            for name, column in zip(
                _continuous_columns(prefix, matrix.shape[1]), matrix.T, strict=True
            ):
                columns[name] = column
    columns["task"] = pd.array(
        [pd.NA] * n if dataset.tasks is None else dataset.tasks, dtype="Int64"
    )
    return pd.DataFrame(columns)


def dataset_from_frame(frame: pd.DataFrame, dt: float = 1.0) -> Dataset:
    """
    Rebuild a dataset from a table written by ``dataset_to_frame``.

    Args:
        frame: The table.
        dt: Time step recorded in the file header.

    Returns:
        The dataset.

    Raises:
        DataError: If required columns are missing.

    """
    required = {"episode", "t", "task"}
    if not required.issubset(frame.columns):
        raise DataError(f"Dataset table lacks columns {sorted(required - set(frame.columns))}")
    times = frame["t"]
    tasks = frame["task"]
    time_index = None if times.isna().all() else times.to_numpy(dtype=np.int64)
    task_labels = None if tasks.isna().all() else tasks.to_numpy(dtype=np.int64)
    if "state" in frame.columns:
        states = frame["state"].to_numpy(dtype=np.int64)
        actions = frame["action"].to_numpy(dtype=np.int64)
        next_states = frame["next_state"].to_numpy(dtype=np.int64)
    else:
        def block(prefix: str) -> np.ndarray:
            names = [c for c in frame.columns if re.fullmatch(rf"{prefix}_\d+", str(c))]
            if not names:
                raise DataError(f"Dataset table has no '{prefix}_*' columns")
            names.sort(key=lambda c: int(str(c).split("_")[1]))
            return frame[names].to_numpy(dtype=float)

        states, actions, next_states = block("s"), block("a"), block("n")
    return Dataset(
        states=states,
        actions=actions,
        next_states=next_states,
        episodes=frame["episode"].to_numpy(dtype=np.int64),
        time_index=time_index,
        tasks=task_labels,
        dt=dt,
    )


def save_dataset_csv(dataset: Dataset, path: Path) -> None:
    """
    Write a dataset as CSV with a ``# dataset.v1 dt=<dt>`` first line.

    Args:
        dataset: Dataset to write.
        path: Target file.

    """
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dataset_to_frame(dataset).to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="")
    path.write_text(f"# dataset.v1 dt={dataset.dt!r}\n{body}", encoding="utf-8")
    logger.debug(f"Wrote {len(dataset)} transitions to {path}")


def load_dataset_csv(path: Path) -> Dataset:
    """
    Read a dataset CSV.

    Args:
        path: File to read.

    Returns:
        The dataset.

    Raises:
        MissingArtifactError: If the file does not exist.
        FormatVersionError: If the version header is missing or unknown.
        DataError: If the table is malformed.

    """
    if not path.is_file():
        raise MissingArtifactError(f"Dataset file '{path}' does not exist")
    with path.open(encoding="utf-8") as handle:
        first = handle.readline()
    match = DATASET_HEADER.match(first)
    if not match:
        raise FormatVersionError(f"'{path}' does not start with a '# dataset.v1' header")
    dt = float(match.group("dt")) if match.group("dt") else 1.0
    try:
        frame = pd.read_csv(path, skiprows=1)
    except (pd.errors.ParserError, ValueError) as e:
        raise DataError(f"Cannot parse dataset '{path}': {e}") from e
    return dataset_from_frame(frame, dt)


def save_dataset_npz(dataset: Dataset, path: Path) -> None:
    """
    Write a dataset as a NumPy ``.npz`` archive with ``format=dataset.v1``.

    Args:
        dataset: Dataset to write.
        path: Target file.

    """
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {
        "format": np.array("dataset.v1"),
        "dt": np.array(dataset.dt),
        "states": dataset.states,
        "actions": dataset.actions,
        "next_states": dataset.next_states,
        "episodes": dataset.episodes,
    }
    if dataset.time_index is not None:
        arrays["time_index"] = dataset.time_index
    if dataset.tasks is not None:
        arrays["tasks"] = dataset.tasks
    with path.open("wb") as handle:
        np.savez(handle, **arrays)


def load_dataset_npz(path: Path) -> Dataset:
    """
    Read a dataset ``.npz`` archive.

    Args:
        path: File to read.

    Returns:
        The dataset.

    Raises:
        MissingArtifactError: If the file does not exist.
        FormatVersionError: If the archive is not ``dataset.v1``.

    """
    if not path.is_file():
        raise MissingArtifactError(f"Dataset file '{path}' does not exist")
    with np.load(path, allow_pickle=False) as archive:
        if "format" not in archive or str(archive["format"]) != "dataset.v1":
            raise FormatVersionError(f"'{path}' is not a dataset.v1 archive")
        return Dataset(
            states=archive["states"],
            actions=archive["actions"],
            next_states=archive["next_states"],
            episodes=archive["episodes"],
            time_index=archive["time_index"] if "time_index" in archive else None,
            tasks=archive["tasks"] if "tasks" in archive else None,
            dt=float(archive["dt"]),
        )


def load_dataset(path: Path) -> Dataset:
    """Read a dataset file, choosing the format from the suffix (``.npz`` or CSV)."""
    return load_dataset_npz(path) if path.suffix == ".npz" else load_dataset_csv(path)


def save_dataset(dataset: Dataset, path: Path) -> None:
    """Write a dataset file, choosing the format from the suffix (``.npz`` or CSV)."""
    if path.suffix == ".npz":
        save_dataset_npz(dataset, path)
    else:
        save_dataset_csv(dataset, path)


def _pose_parts(columns: list[str]) -> list[str]:
    parts = [c[:-2] for c in columns if c.endswith("_x")]
    missing = [p for p in parts if f"{p}_y" not in columns]
    if not parts or missing:
        raise DataError(
            "Pose table needs matching '<part>_x' and '<part>_y' columns"
            + (f"; no '_y' for {missing}" if missing else "")
        )
    return parts


def load_pose_csv(path: Path, frame_rate: float = 30.0) -> KeypointRecording:
    """
    Read a pose recording from CSV.

    The optional first line ``# pose.v1`` is the version header. Columns are
    ``<part>_x, <part>_y`` pairs plus an optional ``frame`` column that
    orders the rows. Empty cells become NaN.

    Args:
        path: File to read.
        frame_rate: Frames per second.

    Returns:
        The recording with x and y interleaved per part.

    Raises:
        MissingArtifactError: If the file does not exist.
        FormatVersionError: If a different version header is present.
        DataError: If the table is malformed or non-numeric.

    """
    if not path.is_file():
        raise MissingArtifactError(f"Pose file '{path}' does not exist")
    with path.open(encoding="utf-8") as handle:
        first = handle.readline().strip()
    skip = 0
    if first.startswith("#"):
        if first != POSE_HEADER:
            raise FormatVersionError(f"'{path}' has unknown header '{first}'")
        skip = 1
    try:
        frame = pd.read_csv(path, skiprows=skip)
    except (pd.errors.ParserError, ValueError) as e:
        raise DataError(f"Cannot parse pose file '{path}': {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    if "frame" in frame.columns:
        frame = frame.sort_values("frame", kind="stable")
    parts = _pose_parts(list(frame.columns))
    ordered = [name for part in parts for name in (f"{part}_x", f"{part}_y")]
    try:
        values = frame[ordered].apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except ValueError as e:
        raise DataError(f"Pose file '{path}' holds non-numeric coordinates: {e}") from e
    logger.debug(f"Read {values.shape[0]} frames of {len(parts)} parts from {path}")
    return KeypointRecording(frames=values, frame_rate=frame_rate, part_names=tuple(parts))


def save_pose_csv(recording: KeypointRecording, path: Path) -> None:
    """
    Write a pose recording as CSV with the ``# pose.v1`` header line.

    Args:
        recording: Recording to write.
        path: Target file.

    """
    names = recording.part_names or tuple(f"part{i}" for i in range(recording.n_parts))
    columns = [name for part in names for name in (f"{part}_x", f"{part}_y")]
    frame = pd.DataFrame(recording.frames, columns=columns)
    frame.insert(0, "frame", np.arange(len(frame)))
    path.parent.mkdir(parents=True, exist_ok=True)
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="")
    path.write_text(f"{POSE_HEADER}\n{body}", encoding="utf-8")


def load_pose_npz(path: Path) -> KeypointRecording:
    """
    Read a pose recording from a ``.npz`` archive with ``format=pose.v1``.

    Raises:
        MissingArtifactError: If the file does not exist.
        FormatVersionError: If the archive is not ``pose.v1``.

    """
    if not path.is_file():
        raise MissingArtifactError(f"Pose file '{path}' does not exist")
    with np.load(path, allow_pickle=False) as archive:
        if "format" not in archive or str(archive["format"]) != "pose.v1":
            raise FormatVersionError(f"'{path}' is not a pose.v1 archive")
        return KeypointRecording(
            frames=np.asarray(archive["frames"], dtype=float),
            frame_rate=float(archive["frame_rate"]),
            part_names=tuple(str(p) for p in archive["part_names"]),
        )


def save_pose_npz(recording: KeypointRecording, path: Path) -> None:
    """Write a pose recording as a ``pose.v1`` ``.npz`` archive."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        np.savez(
            handle,
            format=np.array("pose.v1"),
            frames=recording.frames,
            frame_rate=np.array(recording.frame_rate),
            part_names=np.array(recording.part_names, dtype=str),
        )


def load_recording(path: Path, frame_rate: float = 30.0) -> KeypointRecording:
    """Read a pose recording, choosing the format from the suffix (``.npz`` or CSV)."""
    return load_pose_npz(path) if path.suffix == ".npz" else load_pose_csv(path, frame_rate)
