"""Soft value iteration, softmax policies and demonstration sampling."""

from collections.abc import Sequence

import numpy as np
from mkdocs.plugins import get_plugin_logger
from scipy.special import logsumexp, softmax

from .exceptions import ConfigurationError, ShapeMismatchError
from .models import Dataset, FloatArray, IntArray, Policy, TabularMDP, ValueTables
from .utils import indexed_rng
from .validator import validate_discrete_dataset, validate_mdp, validate_policy_shape

logger = get_plugin_logger(__name__)


def soft_bellman_backup(mdp: TabularMDP, task: int, q: FloatArray) -> FloatArray:
    """
    Apply one soft Bellman backup ``Q <- r + gamma * P V`` with ``V = logsumexp_a Q``.

    Args:
        mdp: The MDP.
        task: Task whose reward is used.
        q: Current state-action values ``(S, A)``.

    Returns:
        The backed-up values ``(S, A)``.

    """
    v = logsumexp(q, axis=1)
    return mdp.rewards[task] + mdp.gamma * (mdp.transition @ v)


def soft_value_iteration(
    mdp: TabularMDP, task: int, tol: float = 1e-8, max_iters: int = 10_000
) -> ValueTables:
    """
    Solve one task of an MDP by soft (maximum-entropy) value iteration.

    Iterates from ``Q = 0`` until the sup-norm Bellman residual drops to
    ``tol``. Hitting ``max_iters`` is not an error: the slice is returned with
    ``converged=False`` and a warning is logged.

    Args:
        mdp: The MDP.
        task: Task index.
        tol: Residual tolerance, positive.
        max_iters: Iteration cap.

    Returns:
        Single-task value tables (task axis of length 1).

    Raises:
        ConfigurationError: If ``tol`` or ``task`` is invalid.

    """
    validate_mdp(mdp)
    if tol <= 0:
        raise ConfigurationError(f"Tolerance must be positive, got {tol}")
    if not 0 <= task < mdp.n_tasks:
        raise ConfigurationError(f"Task {task} outside [0, {mdp.n_tasks})")

    q = np.zeros((mdp.n_states, mdp.n_actions))
    residual = np.inf
    iteration = 0
    while iteration < max_iters:
        q_next = soft_bellman_backup(mdp, task, q)
        residual = float(np.max(np.abs(q_next - q)))
        q = q_next
        iteration += 1
        if residual <= tol:
            break
    converged = residual <= tol
    if not converged:
        logger.warning(
            f"Soft value iteration for task {task} stopped after {iteration} "
            f"iterations with residual {residual:.3e} > {tol:.1e}"
        )
    return ValueTables(
        q_values=q[None],
        v_values=logsumexp(q, axis=1)[None],
        converged=(converged,),
        residuals=(residual,),
        iterations=(iteration,),
    )


def solve_all_tasks(
    mdp: TabularMDP, tol: float = 1e-8, max_iters: int = 10_000
) -> ValueTables:
    """
    Run soft value iteration for every task of an MDP.

    Args:
        mdp: The MDP.
        tol: Residual tolerance.
        max_iters: Iteration cap per task.

    Returns:
        Value tables stacked over tasks.

    """
    return ValueTables.stack(
        [soft_value_iteration(mdp, t, tol, max_iters) for t in range(mdp.n_tasks)]
    )


def softmax_policy(values: ValueTables) -> Policy:
    """
    Turn Q values into the maximum-entropy policy ``pi ∝ exp(Q)``.

    Args:
        values: Value tables with finite Q values.

    Returns:
        The softmax policy over the last axis.

    """
    return Policy(probs=softmax(values.q_values, axis=-1))


def _draw(cdf: FloatArray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from one cumulative distribution row."""
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), cdf.size - 1))


def sample_trajectories(
    mdp: TabularMDP,
    policy: Policy,
    n_episodes: int,
    horizon: int,
    task_schedule: Sequence[int],
    seed: int,
) -> Dataset:
    """
    Sample demonstration episodes from a policy.

    Each episode draws ``s0 ~ rho`` and then ``horizon`` steps of
    ``a ~ pi(.|s, task)``, ``s' ~ P(.|s, a)``. Episode ``e`` uses its own
    generator derived from ``(seed, e)``, so episodes are independent of
    each other and of the order they are produced in.

    Args:
        mdp: The MDP.
        policy: Policy with one row block per task.
        n_episodes: Number of episodes.
        horizon: Steps per episode.
        task_schedule: Task of each episode.
        seed: Seed of the sampling stream.

    Returns:
        Dataset with episode, time index and task label on every transition.

    Raises:
        ConfigurationError: If the schedule length or a task index is invalid.
        ShapeMismatchError: If the policy does not fit the MDP.

    """
    validate_policy_shape(mdp, policy)
    if len(task_schedule) != n_episodes:
        raise ConfigurationError(
            f"Task schedule has {len(task_schedule)} entries for {n_episodes} episodes"
        )
    if any(not 0 <= t < policy.n_tasks for t in task_schedule):
        raise ShapeMismatchError(f"Task schedule indexes beyond {policy.n_tasks} policies")

    rho_cdf = np.cumsum(mdp.rho)
    policy_cdf = np.cumsum(policy.probs, axis=-1)
    transition_cdf = np.cumsum(mdp.transition, axis=-1)

    n_rows = n_episodes * horizon
    states = np.empty(n_rows, dtype=np.int64)
    actions = np.empty(n_rows, dtype=np.int64)
    next_states = np.empty(n_rows, dtype=np.int64)
    episodes = np.empty(n_rows, dtype=np.int64)
    times = np.empty(n_rows, dtype=np.int64)
    tasks = np.empty(n_rows, dtype=np.int64)

    row = 0
    for episode, task in enumerate(task_schedule):
        rng = indexed_rng(seed, episode)
        s = _draw(rho_cdf, rng)
        for t in range(horizon):
            a = _draw(policy_cdf[task, s], rng)
            s_next = _draw(transition_cdf[s, a], rng)
            states[row], actions[row], next_states[row] = s, a, s_next
            episodes[row], times[row], tasks[row] = episode, t, task
            row += 1
            s = s_next

    logger.debug(f"Sampled {n_episodes} episodes, {n_rows} transitions")
    return Dataset(
        states=states,
        actions=actions,
        next_states=next_states,
        episodes=episodes,
        time_index=times,
        tasks=tasks,
    )


def state_action_counts(
    dataset: Dataset, n_states: int, n_actions: int, n_tasks: int
) -> FloatArray:
    """
    Count transitions per task, state and action.

    Args:
        dataset: Discrete dataset with task labels.
        n_states: Number of states.
        n_actions: Number of actions.
        n_tasks: Number of tasks.

    Returns:
        Counts indexed ``(task, s, a)``.

    """
    validate_discrete_dataset(dataset, n_states, n_actions, n_tasks)
    counts = np.zeros((n_tasks, n_states, n_actions))
    assert dataset.tasks is not None
    np.add.at(counts, (dataset.tasks, dataset.states, dataset.actions), 1.0)
    return counts


def empirical_transitions(dataset: Dataset, n_states: int, n_actions: int) -> FloatArray:
    """
    Estimate ``P(s'|s,a)`` from transition counts.

    Pairs never observed get a uniform row so the result stays a valid
    transition tensor.

    Args:
        dataset: Discrete dataset.
        n_states: Number of states.
        n_actions: Number of actions.

    Returns:
        Transition tensor ``(S, A, S)``.

    """
    validate_discrete_dataset(dataset, n_states, n_actions)
    counts = np.zeros((n_states, n_actions, n_states))
    np.add.at(counts, (dataset.states, dataset.actions, dataset.next_states), 1.0)
    totals = counts.sum(axis=2, keepdims=True)
    uniform = np.full_like(counts, 1.0 / n_states)
    return np.where(totals > 0, counts / np.maximum(totals, 1.0), uniform)


def task_schedule(n_tasks: int, episodes_per_task: int) -> IntArray:
    """Task of each episode when every task gets the same number of episodes."""
    return np.repeat(np.arange(n_tasks, dtype=np.int64), episodes_per_task)
