"""Invariant checks for skillbasis domain objects."""

import numpy as np

from .exceptions import ConfigurationError, DataError, ShapeMismatchError
from .models import Dataset, GridworldSpec, LabyrinthSpec, Policy, TabularMDP

PROBABILITY_ATOL = 1e-9


def validate_mdp(mdp: TabularMDP) -> None:
    """
    Run all validation checks on an MDP.

    Args:
        mdp: The MDP to validate.

    Raises:
        ShapeMismatchError: If tensor shapes disagree.
        ConfigurationError: If probabilities, rewards or gamma are invalid.

    """
    validate_mdp_shapes(mdp)
    validate_transition_rows(mdp)
    validate_initial_distribution(mdp)
    validate_rewards(mdp)
    if not 0.0 < mdp.gamma < 1.0:
        raise ConfigurationError(f"Discount gamma={mdp.gamma} must lie in (0, 1)")


def validate_mdp_shapes(mdp: TabularMDP) -> None:
    """
    Validate that transition, reward and rho tensors agree.

    Args:
        mdp: The MDP to validate.

    Raises:
        ShapeMismatchError: If any shape disagrees.

    """
    p = mdp.transition
    if p.ndim != 3 or p.shape[0] != p.shape[2]:
        raise ShapeMismatchError(
            f"Transition tensor must be (S, A, S), got shape {p.shape}"
        )
    if mdp.rewards.ndim != 3 or mdp.rewards.shape[1:] != p.shape[:2]:
        raise ShapeMismatchError(
            f"Rewards must be (task, {p.shape[0]}, {p.shape[1]}), "
            f"got shape {mdp.rewards.shape}"
        )
    if mdp.rho.shape != (p.shape[0],):
        raise ShapeMismatchError(
            f"Initial distribution must have {p.shape[0]} entries, got {mdp.rho.shape}"
        )


def validate_transition_rows(mdp: TabularMDP) -> None:
    """
    Validate that every ``(s, a)`` row is a probability distribution.

    Args:
        mdp: The MDP to validate.

    Raises:
        ConfigurationError: If a row is negative or does not sum to 1.

    """
    p = mdp.transition
    if np.any(p < 0):
        s, a, s2 = np.argwhere(p < 0)[0]
        raise ConfigurationError(f"Negative transition probability at ({s}, {a}, {s2})")
    sums = p.sum(axis=2)
    bad = np.abs(sums - 1.0) > PROBABILITY_ATOL
    if np.any(bad):
        s, a = np.argwhere(bad)[0]
        raise ConfigurationError(
            f"Transition row ({s}, {a}) sums to {sums[s, a]!r}, expected 1"
        )


def validate_initial_distribution(mdp: TabularMDP) -> None:
    """
    Validate that rho is a probability distribution.

    Args:
        mdp: The MDP to validate.

    Raises:
        ConfigurationError: If rho is negative or does not sum to 1.

    """
    if np.any(mdp.rho < 0) or abs(float(mdp.rho.sum()) - 1.0) > PROBABILITY_ATOL:
        raise ConfigurationError("Initial distribution rho must be a probability vector")


def validate_rewards(mdp: TabularMDP) -> None:
    """
    Validate that rewards lie in ``[0, 1]``.

    Args:
        mdp: The MDP to validate.

    Raises:
        ConfigurationError: If a reward lies outside ``[0, 1]``.

    """
    if np.any(mdp.rewards < 0) or np.any(mdp.rewards > 1):
        raise ConfigurationError("Rewards must lie in [0, 1]")


def validate_gridworld_spec(spec: GridworldSpec) -> None:
    """
    Validate a gridworld layout.

    Args:
        spec: The layout to validate.

    Raises:
        ConfigurationError: If dimensions or goal cells are invalid.

    """
    if spec.width < 1 or spec.height < 1:
        raise ConfigurationError(
            f"Grid must be at least 1x1, got {spec.width}x{spec.height}"
        )
    if not spec.task_locations:
        raise ConfigurationError("Gridworld needs at least one task location")
    for row, col in spec.task_locations:
        if not (0 <= row < spec.height and 0 <= col < spec.width):
            raise ConfigurationError(
                f"Task location ({row}, {col}) lies outside the "
                f"{spec.width}x{spec.height} grid"
            )


def validate_labyrinth_spec(spec: LabyrinthSpec) -> None:
    """
    Validate a labyrinth layout.

    Args:
        spec: The layout to validate.

    Raises:
        ConfigurationError: If depth or node indices are invalid.

    """
    if spec.depth < 1:
        raise ConfigurationError(f"Labyrinth depth must be >= 1, got {spec.depth}")
    for name, node in (("home_node", spec.home_node), ("port_node", spec.resolved_port)):
        if not 0 <= node < spec.n_nodes:
            raise ConfigurationError(
                f"{name}={node} is not a node of a depth-{spec.depth} tree "
                f"({spec.n_nodes} nodes)"
            )


def validate_policy_shape(mdp: TabularMDP, policy: Policy) -> None:
    """
    Validate that a policy matches an MDP.

    Args:
        mdp: The MDP the policy acts in.
        policy: The policy to validate.

    Raises:
        ShapeMismatchError: If the shapes disagree.

    """
    expected = (mdp.n_states, mdp.n_actions)
    if policy.probs.ndim != 3 or policy.probs.shape[1:] != expected:
        raise ShapeMismatchError(
            f"Policy shape {policy.probs.shape} does not match MDP (task, *{expected})"
        )


def validate_discrete_dataset(
    dataset: Dataset, n_states: int, n_actions: int, n_tasks: int | None = None
) -> None:
    """
    Validate that a discrete dataset indexes a given space.

    Args:
        dataset: The dataset to validate.
        n_states: Number of states of the generating space.
        n_actions: Number of actions of the generating space.
        n_tasks: Number of tasks; when given, task labels are required.

    Raises:
        DataError: If indices are out of range or labels are missing.

    """
    if not dataset.is_discrete:
        raise DataError("Expected a discrete dataset with integer states")
    for name, values, bound in (
        ("state", dataset.states, n_states),
        ("action", dataset.actions, n_actions),
        ("next_state", dataset.next_states, n_states),
    ):
        if len(values) and (values.min() < 0 or values.max() >= bound):
            raise DataError(f"Dataset {name} index outside [0, {bound})")
    if n_tasks is not None:
        if dataset.tasks is None:
            raise DataError("Dataset carries no task labels")
        if len(dataset.tasks) and (dataset.tasks.min() < 0 or dataset.tasks.max() >= n_tasks):
            raise DataError(f"Dataset task label outside [0, {n_tasks})")


def validate_time_index(dataset: Dataset) -> None:
    """
    Validate that time indices exist and increase strictly within each episode.

    Args:
        dataset: The dataset to validate.

    Raises:
        ConfigurationError: If time indices are missing or not increasing.

    """
    if dataset.time_index is None:
        raise ConfigurationError("Dataset has no time indices")
    for episode in np.unique(dataset.episodes):
        times = dataset.time_index[dataset.episodes == episode]
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError(
                f"Time indices are not strictly increasing in episode {episode}"
            )
