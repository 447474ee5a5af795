"""Continuous datasets: pose-derived transitions, block splits and synthetic generators."""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from mkdocs.plugins import get_plugin_logger

from .exceptions import ConfigurationError, DataError, NonFiniteDataError
from .models import Dataset, FloatArray, KeypointRecording, SyntheticSpec
from .utils import rank_auc, stage_rng

logger = get_plugin_logger(__name__)

SYNTHETIC_DYNAMICS = ("linear-gaussian", "two-regime-switch", "signal-free")
# Scale of the orthogonal action rule and of the closed loop.
POLICY_GAIN = 1.5
CLOSED_LOOP_RADIUS = 0.95


def derive_dataset(recording: KeypointRecording, dt: float = 1.0) -> Dataset:
    """
    Turn a pose recording into transitions ``(s_t, (s_{t+1} - s_t) / dt, s_{t+1})``.

    Args:
        recording: Keypoint frames.
        dt: Time step, positive.

    Returns:
        Dataset with one transition per consecutive frame pair and
        ``time_index = t``.

    Raises:
        ConfigurationError: If ``dt <= 0``.
        DataError: If the recording has fewer than two frames.
        NonFiniteDataError: If a coordinate is not finite; names the frame.

    """
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    frames = np.asarray(recording.frames, dtype=float)
    if frames.ndim != 2 or frames.shape[0] < 2:
        raise DataError(f"Recording needs at least 2 frames, got {frames.shape[0]}")
    bad = np.flatnonzero(~np.all(np.isfinite(frames), axis=1))
    if bad.size:
        raise NonFiniteDataError(
            f"Frame {int(bad[0])} has non-finite coordinates ({bad.size} bad frames in total)"
        )
    states = frames[:-1]
    next_states = frames[1:]
    n = states.shape[0]
    return Dataset(
        states=states,
        actions=(next_states - states) / dt,
        next_states=next_states,
        episodes=np.zeros(n, dtype=np.int64),
        time_index=np.arange(n, dtype=np.int64),
        dt=dt,
    )


def interpolate_gaps(recording: KeypointRecording, max_gap: int) -> KeypointRecording:
    """
    Linearly fill interior runs of missing coordinates no longer than ``max_gap`` frames.

    Longer runs and runs touching either end of the recording are left
    non-finite.

    Args:
        recording: Keypoint frames, possibly with NaN or inf.
        max_gap: Longest run to fill; 0 fills nothing.

    Returns:
        A new recording.

    """
    frame = pd.DataFrame(recording.frames).replace([np.inf, -np.inf], np.nan)
    if max_gap <= 0 or not frame.isna().any().any():
        return recording
    missing = frame.isna()
    run_id = (missing != missing.shift()).cumsum()
    run_length = pd.DataFrame(
        {col: missing[col].groupby(run_id[col]).transform("sum") for col in frame.columns}
    )
    filled = frame.interpolate(method="linear", limit_area="inside", axis=0)
    filled = filled.mask(missing & (run_length > max_gap))
    logger.debug(f"Interpolated {int((missing & filled.notna()).sum().sum())} missing coordinates")
    return KeypointRecording(
        frames=filled.to_numpy(dtype=float),
        frame_rate=recording.frame_rate,
        part_names=recording.part_names,
    )


def split_train_test(
    dataset: Dataset, ratio: float, seed: int, n_blocks: int = 10
) -> tuple[Dataset, Dataset]:
    """
    Split a dataset into contiguous blocks and hold some of them out.

    Rows are cut into ``n_blocks`` contiguous blocks in order;
    ``round((1 - ratio) * n_blocks)`` of them (at least one, at most
    ``n_blocks - 1``) are chosen for the test set by a seeded draw.

    Args:
        dataset: Dataset to split.
        ratio: Training fraction in ``(0, 1)``.
        seed: Seed of the block draw.
        n_blocks: Number of blocks, at least 2.

    Returns:
        ``(train, test)``, each keeping the original row order.

    Raises:
        ConfigurationError: If ``ratio`` or ``n_blocks`` is invalid.
        DataError: If the dataset has fewer rows than blocks.

    """
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError(f"Split ratio must lie in (0, 1), got {ratio}")
    if n_blocks < 2:
        raise ConfigurationError(f"Need at least 2 blocks, got {n_blocks}")
    n = len(dataset)
    if n < n_blocks:
        raise DataError(f"Dataset of {n} rows is too small for {n_blocks} blocks")

    blocks = np.array_split(np.arange(n), n_blocks)
    n_test = min(max(1, round((1.0 - ratio) * n_blocks)), n_blocks - 1)
    test_blocks = np.sort(stage_rng(seed, "split").choice(n_blocks, size=n_test, replace=False))
    is_test = np.zeros(n_blocks, dtype=bool)
    is_test[test_blocks] = True
    train_rows = np.concatenate([b for b, t in zip(blocks, is_test, strict=True) if not t])
    test_rows = np.concatenate([b for b, t in zip(blocks, is_test, strict=True) if t])
    logger.debug(f"Split {n} rows: test blocks {test_blocks.tolist()} of {n_blocks}")
    return dataset.subset(train_rows), dataset.subset(test_rows)


@dataclass(frozen=True, eq=False)
class SyntheticSystem:
    """
    Matrices of the synthetic linear system ``s' = A s + B a + noise``.

    Attributes:
        a_matrix: Open-loop state dynamics.
        b_matrix: Action gain.
        gains: Action rule ``a = K s + noise`` per regime.
        switch_time: First time index of the second regime.

    """

    a_matrix: FloatArray
    b_matrix: FloatArray
    gains: tuple[FloatArray, ...]
    switch_time: int

    def gain_at(self, times: np.ndarray) -> FloatArray:
        """Action-rule matrices per row, ``(N, D, D)``."""
        index = (np.asarray(times) >= self.switch_time).astype(int)
        index = np.minimum(index, len(self.gains) - 1)
        return np.stack(self.gains)[index]


def _orthogonal(rng: np.random.Generator, dim: int) -> FloatArray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def synthetic_system(spec: SyntheticSpec) -> SyntheticSystem:
    """
    Build the seeded matrices behind ``generate_synthetic``.

    The action rule is ``K = 1.5 Q_K`` and ``B = 0.5 I``; ``A`` is chosen so
    the closed loop ``A + B K`` equals ``0.95 Q`` for an orthogonal ``Q``.
    The second regime of ``two-regime-switch`` flips the closed loop to
    ``-0.95 Q``, which moves its rule by ``3.8 Q``.

    Args:
        spec: Generator settings.

    Returns:
        The system.

    """
    rng = stage_rng(spec.seed, "synthetic-system")
    dim = spec.state_dim
    b_matrix = 0.5 * np.eye(dim)
    closed_loop = CLOSED_LOOP_RADIUS * _orthogonal(rng, dim)
    gain = POLICY_GAIN * _orthogonal(rng, dim)
    a_matrix = closed_loop - b_matrix @ gain
    gains: tuple[FloatArray, ...] = (gain,)
    if spec.dynamics == "two-regime-switch":
        gains = (gain, gain - np.linalg.solve(b_matrix, 2.0 * closed_loop))
    return SyntheticSystem(a_matrix, b_matrix, gains, switch_time=spec.length // 2)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """
    Generate a synthetic continuous trajectory.

    ``linear-gaussian``: ``a = K s + action_noise * xi``,
    ``s' = A s + B a + noise_std * eps``. ``two-regime-switch``: as above with
    a second rule ``K`` from ``t = length // 2`` on. ``signal-free``: states,
    actions and successors are independent standard normal draws.

    Args:
        spec: Generator settings.

    Returns:
        Dataset of ``length - 1`` transitions with ``time_index = t``.

    Raises:
        ConfigurationError: If the spec is invalid.

    """
    if spec.dynamics not in SYNTHETIC_DYNAMICS:
        raise ConfigurationError(f"Unknown synthetic dynamics '{spec.dynamics}'")
    if spec.length < 2 or spec.noise_std < 0 or spec.action_noise < 0 or spec.state_dim < 1:
        raise ConfigurationError(f"Invalid synthetic spec {spec}")
    rng = stage_rng(spec.seed, "synthetic-data")
    n, dim = spec.length - 1, spec.state_dim

    if spec.dynamics == "signal-free":
        states = rng.standard_normal((n, dim))
        actions = rng.standard_normal((n, dim))
        next_states = rng.standard_normal((n, dim))
    else:
        system = synthetic_system(spec)
        trajectory = np.empty((spec.length, dim))
        actions = np.empty((n, dim))
        trajectory[0] = rng.standard_normal(dim) * 0.5
        for t in range(n):
            s = trajectory[t]
            gain = system.gains[min(int(t >= system.switch_time), len(system.gains) - 1)]
            actions[t] = gain @ s + spec.action_noise * rng.standard_normal(dim)
            trajectory[t + 1] = (
                system.a_matrix @ s
                + system.b_matrix @ actions[t]
                + spec.noise_std * rng.standard_normal(dim)
            )
        states, next_states = trajectory[:-1], trajectory[1:]

    return Dataset(
        states=states,
        actions=actions,
        next_states=next_states,
        episodes=np.zeros(n, dtype=np.int64),
        time_index=np.arange(n, dtype=np.int64),
    )


def oracle_scores(
    spec: SyntheticSpec,
    states: FloatArray,
    actions: FloatArray,
    next_states: FloatArray,
    times: np.ndarray,
) -> tuple[FloatArray, FloatArray]:
    """
    Bayes-optimal ranking scores of the generator.

    Transition: ``-||s' - A s - B a||^2``. Policy: ``-||a - K(t) s||^2``.
    Both are zero for ``signal-free`` data, where no ranking beats chance.

    Args:
        spec: Generator settings the rows came from.
        states: States ``(N, D)``.
        actions: Actions ``(N, D)``.
        next_states: Successors ``(N, D)``.
        times: Time index per row.

    Returns:
        Transition scores and policy scores.

    """
    n = states.shape[0]
    if spec.dynamics == "signal-free":
        return np.zeros(n), np.zeros(n)
    system = synthetic_system(spec)
    predicted = states @ system.a_matrix.T + actions @ system.b_matrix.T
    transition = -np.sum((next_states - predicted) ** 2, axis=1)
    rule = np.einsum("nij,nj->ni", system.gain_at(times), states)
    policy = -np.sum((actions - rule) ** 2, axis=1)
    return transition, policy


def bayes_auc(spec: SyntheticSpec, dataset: Dataset, seed: int) -> dict[str, float]:
    """
    AUC ceilings of the generator's own scores under the evaluation pairing.

    Negatives are drawn exactly as in the model evaluation for the same seed.

    Args:
        spec: Generator settings.
        dataset: Rows to evaluate (at least two, with time indices).
        seed: Seed of the pairing draw.

    Returns:
        ``{"transition": ..., "policy": ...}``.

    Raises:
        DataError: If the dataset has fewer than two rows.

    """
    n = len(dataset)
    if n < 2:
        raise DataError(f"AUC evaluation needs at least 2 rows, got {n}")
    times = dataset.time_index if dataset.time_index is not None else np.arange(n)
    rows = np.arange(n)
    other_t = (rows + stage_rng(seed, "eval-transition").integers(1, n, size=(n, 1))[:, 0]) % n
    other_p = (rows + stage_rng(seed, "eval-policy").integers(1, n, size=(n, 1))[:, 0]) % n

    pos_t, pos_p = oracle_scores(spec, dataset.states, dataset.actions, dataset.next_states, times)
    neg_t, _ = oracle_scores(
        spec, dataset.states, dataset.actions, dataset.next_states[other_t], times
    )
    _, neg_p = oracle_scores(
        spec, dataset.states, dataset.actions[other_p], dataset.next_states, times
    )
    return {"transition": rank_auc(pos_t, neg_t), "policy": rank_auc(pos_p, neg_p)}
