"""Data models for skillbasis."""

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]
BoolArray = NDArray[np.bool_]

GRID_ACTIONS = ("up", "down", "left", "right")
LABYRINTH_ACTIONS = ("left-parent", "right-parent", "left-child", "right-child")
LABYRINTH_TASKS = ("water", "home", "explore")


def _matrix_to_dict(values: NDArray[Any]) -> dict[str, Any]:
    """Encode an array as shape metadata plus nested row-major lists.

    Args:
        values: Array to encode.

    Returns:
        Dictionary with ``shape`` and ``data`` keys.
    """
    return {"shape": list(values.shape), "data": values.tolist()}


def _matrix_from_dict(data: dict[str, Any], dtype: type = np.float64) -> NDArray[Any]:
    """Decode an array written by ``_matrix_to_dict``.

    Args:
        data: Dictionary with ``shape`` and ``data`` keys.
        dtype: Target dtype.

    Returns:
        The decoded array, reshaped to the recorded shape.
    """
    return np.asarray(data["data"], dtype=dtype).reshape(data["shape"])


@dataclass(frozen=True)
class GridworldSpec:
    """
    Layout of a multi-task gridworld.

    Attributes:
        width: Number of columns.
        height: Number of rows.
        task_locations: One goal cell ``(row, col)`` per task.

    """

    width: int
    height: int
    task_locations: tuple[tuple[int, int], ...] = ()

    @staticmethod
    def every_cell(width: int, height: int) -> "GridworldSpec":
        """Create a spec with one task per cell, in row-major order.

        Args:
            width: Number of columns.
            height: Number of rows.

        Returns:
            A spec whose task ``i`` targets the ``i``-th cell.
        """
        cells = tuple((r, c) for r in range(height) for c in range(width))
        return GridworldSpec(width, height, cells)

    def cell_index(self, row: int, col: int) -> int:
        """Return the state index of a cell."""
        return row * self.width + col


@dataclass(frozen=True)
class LabyrinthSpec:
    """
    Binary-tree maze.

    Nodes are numbered breadth-first: the root is 0 and the children of node
    ``i`` are ``2i + 1`` (left) and ``2i + 2`` (right).

    Attributes:
        depth: Tree depth; the tree has ``2**(depth + 1) - 1`` nodes.
        home_node: Node of the home cage.
        port_node: Node of the water port.

    """

    depth: int
    home_node: int = 0
    port_node: int | None = None

    @property
    def n_nodes(self) -> int:
        """Number of nodes in the tree."""
        return 2 ** (self.depth + 1) - 1

    @property
    def resolved_port(self) -> int:
        """Port node, defaulting to the last leaf."""
        return self.n_nodes - 1 if self.port_node is None else self.port_node


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """
    Finite multi-task MDP.

    Attributes:
        transition: Probabilities indexed ``(s, a, s')``.
        rewards: Rewards in ``[0, 1]`` indexed ``(task, s, a)``.
        gamma: Discount factor in ``(0, 1)``.
        rho: Initial state distribution.
        horizon: Episode length used for data generation.
        task_names: One label per task.
        action_names: One label per action.

    """

    transition: FloatArray
    rewards: FloatArray
    gamma: float
    rho: FloatArray
    horizon: int = 12
    task_names: tuple[str, ...] = ()
    action_names: tuple[str, ...] = ()

    @property
    def n_states(self) -> int:
        """Number of states."""
        return int(self.transition.shape[0])

    @property
    def n_actions(self) -> int:
        """Number of actions."""
        return int(self.transition.shape[1])

    @property
    def n_tasks(self) -> int:
        """Number of reward tasks."""
        return int(self.rewards.shape[0])

    @property
    def flat_transition(self) -> FloatArray:
        """Transition matrix with rows indexed by flattened ``(s, a)``."""
        return self.transition.reshape(self.n_states * self.n_actions, self.n_states)

    def successor(self, state: int, action: int) -> int:
        """Most likely successor of ``(state, action)``; exact for deterministic MDPs."""
        return int(np.argmax(self.transition[state, action]))

    def to_dict(self) -> dict[str, Any]:
        """Convert the MDP to an ``mdp.v1`` document.

        Returns:
            Dictionary representation of the MDP.
        """
        return {
            "format": "mdp.v1",
            "gamma": self.gamma,
            "horizon": self.horizon,
            "task_names": list(self.task_names),
            "action_names": list(self.action_names),
            "transition": _matrix_to_dict(self.transition),
            "rewards": _matrix_to_dict(self.rewards),
            "rho": _matrix_to_dict(self.rho),
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "TabularMDP":
        """Create an MDP from an ``mdp.v1`` document.

        Args:
            data: Dictionary produced by ``to_dict``.

        Returns:
            A new TabularMDP instance.
        """
        return TabularMDP(
            transition=_matrix_from_dict(data["transition"]),
            rewards=_matrix_from_dict(data["rewards"]),
            gamma=float(data["gamma"]),
            rho=_matrix_from_dict(data["rho"]),
            horizon=int(data.get("horizon", 12)),
            task_names=tuple(data.get("task_names", ())),
            action_names=tuple(data.get("action_names", ())),
        )


@dataclass(frozen=True, eq=False)
class ValueTables:
    """
    Soft value functions for one or more tasks.

    Attributes:
        q_values: State-action values indexed ``(task, s, a)``.
        v_values: State values indexed ``(task, s)``.
        converged: Per-task convergence flags.
        residuals: Per-task final sup-norm Bellman residuals.
        iterations: Per-task iteration counts.

    """

    q_values: FloatArray
    v_values: FloatArray
    converged: tuple[bool, ...] = ()
    residuals: tuple[float, ...] = ()
    iterations: tuple[int, ...] = ()

    @property
    def all_converged(self) -> bool:
        """Whether every task converged."""
        return all(self.converged)

    @staticmethod
    def stack(slices: Sequence["ValueTables"]) -> "ValueTables":
        """Concatenate single-task slices along the task axis.

        Args:
            slices: Value tables to concatenate, in task order.

        Returns:
            One ValueTables covering all tasks.
        """
        return ValueTables(
            q_values=np.concatenate([v.q_values for v in slices]),
            v_values=np.concatenate([v.v_values for v in slices]),
            converged=tuple(c for v in slices for c in v.converged),
            residuals=tuple(r for v in slices for r in v.residuals),
            iterations=tuple(i for v in slices for i in v.iterations),
        )


@dataclass(frozen=True, eq=False)
class Policy:
    """Softmax policy with probabilities indexed ``(task, s, a)``."""

    probs: FloatArray

    @property
    def n_tasks(self) -> int:
        """Number of tasks."""
        return int(self.probs.shape[0])


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Ordered ``(state, action, next_state)`` transitions.

    Discrete datasets hold integer index vectors; continuous datasets hold
    ``(N, D)`` float matrices.

    Attributes:
        states: State per transition.
        actions: Action per transition.
        next_states: Successor state per transition.
        episodes: Episode (or trajectory block) id per transition.
        time_index: Time step per transition, strictly increasing within an episode.
        tasks: Optional task label per transition.
        dt: Time step between frames.

    """

    states: NDArray[Any]
    actions: NDArray[Any]
    next_states: NDArray[Any]
    episodes: IntArray
    time_index: IntArray | None = None
    tasks: IntArray | None = None
    dt: float = 1.0

    def __len__(self) -> int:
        """Number of transitions."""
        return int(self.states.shape[0])

    @property
    def is_discrete(self) -> bool:
        """Whether states and actions are integer indices."""
        return bool(np.issubdtype(self.states.dtype, np.integer))

    @property
    def state_dim(self) -> int:
        """State dimensionality (1 for discrete datasets)."""
        return 1 if self.states.ndim == 1 else int(self.states.shape[1])

    @property
    def action_dim(self) -> int:
        """Action dimensionality (1 for discrete datasets)."""
        return 1 if self.actions.ndim == 1 else int(self.actions.shape[1])

    def subset(self, rows: NDArray[Any]) -> "Dataset":
        """Return the transitions at the given row indices, in that order.

        Args:
            rows: Integer row indices or a boolean mask.

        Returns:
            A new Dataset with the selected rows.
        """
        return replace(
            self,
            states=self.states[rows],
            actions=self.actions[rows],
            next_states=self.next_states[rows],
            episodes=self.episodes[rows],
            time_index=None if self.time_index is None else self.time_index[rows],
            tasks=None if self.tasks is None else self.tasks[rows],
        )

    @staticmethod
    def concatenate(parts: Sequence["Dataset"]) -> "Dataset":
        """Concatenate datasets sharing the same layout.

        Args:
            parts: Datasets to join, in order.

        Returns:
            The joined dataset.
        """
        first = parts[0]
        has_time = all(p.time_index is not None for p in parts)
        has_task = all(p.tasks is not None for p in parts)
        return Dataset(
            states=np.concatenate([p.states for p in parts]),
            actions=np.concatenate([p.actions for p in parts]),
            next_states=np.concatenate([p.next_states for p in parts]),
            episodes=np.concatenate([p.episodes for p in parts]),
            time_index=(
                np.concatenate([p.time_index for p in parts if p.time_index is not None])
                if has_time
                else None
            ),
            tasks=(
                np.concatenate([p.tasks for p in parts if p.tasks is not None])
                if has_task
                else None
            ),
            dt=first.dt,
        )


@dataclass(frozen=True, eq=False)
class SkillSet:
    """
    Skill basis from a low-rank transition factorization.

    Attributes:
        phi: Skills indexed ``((s, a) flattened, d)``.
        mu_q: State factor times base measure, indexed ``(s', d)``.
        rank_d: Number of skills.
        singular_values: Singular values, zero-padded to ``rank_d``.

    """

    phi: FloatArray
    mu_q: FloatArray
    rank_d: int
    singular_values: FloatArray = field(default_factory=lambda: np.zeros(0))

    def reconstruction(self) -> FloatArray:
        """Rank-d reconstruction of the flattened transition matrix."""
        return self.phi @ self.mu_q.T

    def active(self, rtol: float = 1e-10) -> BoolArray:
        """Skills whose singular value exceeds ``rtol`` times the largest (or 1).

        Args:
            rtol: Relative tolerance.

        Returns:
            Boolean mask over the ``rank_d`` skills.
        """
        s = self.singular_values
        if s.shape[0] != self.rank_d:
            return np.ones(self.rank_d, dtype=bool)
        return s > rtol * max(float(s.max(initial=0.0)), 1.0)

    def to_dict(self) -> dict[str, Any]:
        """Convert skills to the ``skills`` part of a ``skills.v1`` document.

        Returns:
            Dictionary representation of the skill set.
        """
        return {
            "rank_d": self.rank_d,
            "phi": _matrix_to_dict(self.phi),
            "mu_q": _matrix_to_dict(self.mu_q),
            "singular_values": _matrix_to_dict(self.singular_values),
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "SkillSet":
        """Create a SkillSet from a dictionary.

        Args:
            data: Dictionary produced by ``to_dict``.

        Returns:
            A new SkillSet instance.
        """
        return SkillSet(
            phi=_matrix_from_dict(data["phi"]),
            mu_q=_matrix_from_dict(data["mu_q"]),
            rank_d=int(data["rank_d"]),
            singular_values=_matrix_from_dict(data["singular_values"]),
        )


@dataclass(frozen=True, eq=False)
class TaskWeights:
    """
    Per-task skill weights and recovered reward weights.

    Attributes:
        u: Policy weights indexed ``(task, d)``.
        w: Reward weights indexed ``(task, d)``; ``None`` before recovery.
        empty_tasks: Tasks that had no transitions (their ``u`` row is zero).
        converged: Per-task optimizer convergence flags.

    """

    u: FloatArray
    w: FloatArray | None = None
    empty_tasks: tuple[int, ...] = ()
    converged: tuple[bool, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        """Convert weights to the ``weights`` part of a ``skills.v1`` document.

        Returns:
            Dictionary representation of the weights.
        """
        return {
            "u": _matrix_to_dict(self.u),
            "w": None if self.w is None else _matrix_to_dict(self.w),
            "empty_tasks": list(self.empty_tasks),
            "converged": list(self.converged),
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "TaskWeights":
        """Create TaskWeights from a dictionary.

        Args:
            data: Dictionary produced by ``to_dict``.

        Returns:
            A new TaskWeights instance.
        """
        return TaskWeights(
            u=_matrix_from_dict(data["u"]),
            w=None if data.get("w") is None else _matrix_from_dict(data["w"]),
            empty_tasks=tuple(data.get("empty_tasks", ())),
            converged=tuple(data.get("converged", ())),
        )


@dataclass(frozen=True, eq=False)
class KeypointRecording:
    """
    Pose recording of K body parts.

    Attributes:
        frames: Coordinates ``(T, 2K)``, x and y interleaved per part.
        frame_rate: Frames per second.
        part_names: One label per body part.

    """

    frames: FloatArray
    frame_rate: float = 30.0
    part_names: tuple[str, ...] = ()

    @property
    def n_parts(self) -> int:
        """Number of body parts."""
        return int(self.frames.shape[1] // 2)


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Settings of the synthetic continuous generator.

    Attributes:
        state_dim: State (and action) dimensionality.
        dynamics: ``linear-gaussian``, ``two-regime-switch`` or ``signal-free``.
        noise_std: Standard deviation of the transition noise.
        length: Number of states in the trajectory.
        seed: Generator seed.
        action_noise: Standard deviation of the action-rule noise.

    """

    state_dim: int = 2
    dynamics: str = "linear-gaussian"
    noise_std: float = 0.1
    length: int = 2000
    seed: int = 0
    action_noise: float = 0.2


@dataclass(frozen=True, eq=False)
class PcaResult:
    """
    Principal components of a skill matrix.

    Attributes:
        components: Orthonormal rows ``(n_pcs, dim)``.
        explained_variance_ratio: Descending, nonnegative ratios.
        projected_skills: Observations projected on the components.
        mean: Mean observation removed before the decomposition.
        degenerate: Set when the input has zero variance.

    """

    components: FloatArray
    explained_variance_ratio: FloatArray
    projected_skills: FloatArray
    mean: FloatArray
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class EffectiveDimension:
    """
    Per-skill counts of entries above the magnitude threshold.

    Attributes:
        counts: Count per skill.
        threshold: Threshold (pooled scalar or one value per skill).
        mean: Mean count.
        median: Median count.

    """

    counts: IntArray
    threshold: FloatArray
    mean: float
    median: float

    def to_dict(self) -> dict[str, Any]:
        """Convert the summary to a dictionary.

        Returns:
            Dictionary with counts, threshold and summary statistics.
        """
        return {
            "counts": self.counts.tolist(),
            "threshold": self.threshold.tolist(),
            "mean": self.mean,
            "median": self.median,
        }


@dataclass(frozen=True, eq=False)
class MotionField:
    """
    Mean pose and mean displacement over the rows that most activate a skill.

    Attributes:
        skill_index: Skill coordinate used for ranking.
        mean_state: Mean state (pose skeleton).
        mean_action: Mean action (per-keypoint displacement).
        support_size: Number of rows averaged.

    """

    skill_index: int
    mean_state: FloatArray
    mean_action: FloatArray
    support_size: int

    def to_dict(self) -> dict[str, Any]:
        """Convert the motion field to a dictionary.

        Returns:
            Dictionary with skeleton points and arrow vectors.
        """
        return {
            "skill_index": self.skill_index,
            "support_size": self.support_size,
            "mean_state": self.mean_state.tolist(),
            "mean_action": self.mean_action.tolist(),
        }
