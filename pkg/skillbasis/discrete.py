"""Skill discovery, per-task policy fitting and reward recovery for tabular data."""

import numpy as np
from mkdocs.plugins import get_plugin_logger
from scipy import linalg
from scipy.special import logsumexp, softmax

from .exceptions import ConfigurationError, ShapeMismatchError
from .models import (
    BoolArray,
    Dataset,
    FloatArray,
    IntArray,
    SkillSet,
    TabularMDP,
    TaskWeights,
    ValueTables,
)
from .solver import state_action_counts
from .utils import DEGENERATE_RTOL, canonical_basis, degenerate_clusters

logger = get_plugin_logger(__name__)


def factorize_matrix(matrix: FloatArray, rank_d: int) -> SkillSet:
    """
    Best rank-d factorization ``matrix ≈ phi @ mu_q.T`` in Frobenius norm.

    ``phi = U_d diag(s_d)`` and ``mu_q = V_d``. Within a block of equal
    singular values the right vectors are replaced by the canonical basis of
    their span, then each column's sign is set so the largest-magnitude
    entry of its ``phi`` column (``mu_q`` column for zero singular values)
    is positive. Requested ranks above ``min(rows, cols)`` are zero-padded.

    Args:
        matrix: Matrix ``(rows, cols)``; rows are flattened ``(s, a)``.
        rank_d: Number of skills, at least 1.

    Returns:
        The skill set.

    Raises:
        ConfigurationError: If ``rank_d < 1``.

    """
    if rank_d < 1:
        raise ConfigurationError(f"rank_d must be >= 1, got {rank_d}")
    _, s, vt = linalg.svd(matrix, full_matrices=False)
    v = vt.T.copy()
    for cluster in degenerate_clusters(s):
        if cluster.size > 1:
            v[:, cluster] = canonical_basis(v[:, cluster])
    phi = matrix @ v

    for j in range(v.shape[1]):
        ref = phi[:, j] if s[j] > DEGENERATE_RTOL * max(float(s[0]), 1.0) else v[:, j]
        if ref[int(np.argmax(np.abs(ref)))] < 0:
            phi[:, j] *= -1.0
            v[:, j] *= -1.0

    full = s.size
    if rank_d > full:
        logger.info(f"Requested {rank_d} skills, matrix rank bound is {full}; padding with zeros")
        pad = rank_d - full
        phi = np.hstack([phi, np.zeros((phi.shape[0], pad))])
        v = np.hstack([v, np.zeros((v.shape[0], pad))])
        s = np.concatenate([s, np.zeros(pad)])
    return SkillSet(
        phi=phi[:, :rank_d], mu_q=v[:, :rank_d], rank_d=rank_d, singular_values=s[:rank_d]
    )


def factorize_transitions(
    mdp: TabularMDP, rank_d: int, transition: FloatArray | None = None
) -> SkillSet:
    """
    Discover skills from the ``(|S||A|) x |S|`` transition matrix.

    Args:
        mdp: The MDP (its true transition tensor is used by default).
        rank_d: Number of skills.
        transition: Optional replacement tensor ``(S, A, S)``, e.g. the
            empirical transitions of a dataset.

    Returns:
        The skill set.

    Raises:
        ShapeMismatchError: If ``transition`` does not match the MDP.

    """
    tensor = mdp.transition if transition is None else transition
    if tensor.shape != mdp.transition.shape:
        raise ShapeMismatchError(
            f"Transition tensor {tensor.shape} does not match MDP {mdp.transition.shape}"
        )
    matrix = tensor.reshape(mdp.n_states * mdp.n_actions, mdp.n_states)
    skills = factorize_matrix(matrix, rank_d)
    logger.debug(f"Factorized {matrix.shape} transition matrix into {rank_d} skills")
    return skills


def _skill_tensor(skills: SkillSet) -> FloatArray:
    """Skills reshaped to ``(S, A, d)``."""
    n_states = skills.mu_q.shape[0]
    rows = skills.phi.shape[0]
    if rows % n_states:
        raise ShapeMismatchError(
            f"phi has {rows} rows, not a multiple of {n_states} states"
        )
    return skills.phi.reshape(n_states, rows // n_states, skills.rank_d)


def q_from_weights(skills: SkillSet, u: FloatArray) -> FloatArray:
    """
    Q values ``phi(s,a)^T u(t)`` for every task.

    Args:
        skills: Skill set.
        u: Weights ``(task, d)``.

    Returns:
        Q values indexed ``(task, s, a)``.

    """
    return np.einsum("sad,td->tsa", _skill_tensor(skills), u)


def policy_from_weights(skills: SkillSet, u: FloatArray) -> FloatArray:
    """Softmax-linear policy ``pi ∝ exp(phi^T u)`` indexed ``(task, s, a)``."""
    return softmax(q_from_weights(skills, u), axis=-1)


def _task_objective(
    phi: FloatArray, counts: FloatArray, u: FloatArray, ridge: float
) -> tuple[float, FloatArray]:
    """
    Mean log-likelihood minus ridge penalty, and its gradient.

    Args:
        phi: Skills ``(S, A, d)``.
        counts: Transition counts ``(S, A)`` of one task.
        u: Weights ``(d,)``.
        ridge: L2 penalty weight.

    Returns:
        Objective value and gradient with respect to ``u``.

    """
    total = counts.sum()
    logits = phi @ u
    log_pi = logits - logsumexp(logits, axis=1, keepdims=True)
    value = float((counts * log_pi).sum() / total - 0.5 * ridge * (u @ u))
    residual = counts - counts.sum(axis=1, keepdims=True) * np.exp(log_pi)
    grad = np.einsum("sa,sad->d", residual, phi) / total - ridge * u
    return value, grad


def fit_policy_weights_mle(
    dataset: Dataset,
    skills: SkillSet,
    n_tasks: int,
    lr: float = 0.5,
    tol: float = 1e-6,
    max_iters: int = 20_000,
    ridge: float = 1e-4,
) -> TaskWeights:
    """
    Fit per-task skill weights by maximum likelihood.

    For each task, maximizes the average log-likelihood of the softmax-linear
    policy with an L2 ridge by full-batch gradient ascent. A step that does
    not increase the objective is retried with half the step size. The
    objective is concave, so the stationary point is the global optimum.

    Args:
        dataset: Discrete dataset with task labels in ``[0, n_tasks)``.
        skills: Skill set covering the ``(s, a)`` space of the dataset.
        n_tasks: Number of tasks to fit.
        lr: Initial step size.
        tol: Convergence threshold on the gradient infinity-norm.
        max_iters: Iteration cap per task.
        ridge: L2 penalty weight.

    Returns:
        Weights with ``u`` filled; tasks without data are zero and listed in
        ``empty_tasks``.

    """
    phi = _skill_tensor(skills)
    n_states, n_actions, d = phi.shape
    counts = state_action_counts(dataset, n_states, n_actions, n_tasks)

    u = np.zeros((n_tasks, d))
    empty: list[int] = []
    converged: list[bool] = []
    for task in range(n_tasks):
        if counts[task].sum() == 0:
            logger.warning(f"Task {task} has no transitions; its weights stay zero")
            empty.append(task)
            converged.append(False)
            continue
        u[task], ok = _gradient_ascent(phi, counts[task], lr, tol, max_iters, ridge)
        converged.append(ok)
        if not ok:
            logger.warning(f"Policy fit for task {task} did not reach tol={tol:.1e}")
    return TaskWeights(u=u, empty_tasks=tuple(empty), converged=tuple(converged))


def _gradient_ascent(
    phi: FloatArray,
    counts: FloatArray,
    lr: float,
    tol: float,
    max_iters: int,
    ridge: float,
) -> tuple[FloatArray, bool]:
    u = np.zeros(phi.shape[2])
    value, grad = _task_objective(phi, counts, u, ridge)
    step = lr
    for _ in range(max_iters):
        if float(np.max(np.abs(grad))) <= tol:
            return u, True
        candidate = u + step * grad
        cand_value, cand_grad = _task_objective(phi, counts, candidate, ridge)
        if cand_value < value:
            step *= 0.5
            if step < 1e-12:
                break
            continue
        u, value, grad = candidate, cand_value, cand_grad
    return u, bool(np.max(np.abs(grad)) <= tol)


def mle_gradient(
    dataset: Dataset, skills: SkillSet, weights: TaskWeights, ridge: float = 1e-4
) -> FloatArray:
    """
    Gradient of each task's objective at the given weights.

    Args:
        dataset: Discrete dataset with task labels.
        skills: Skill set.
        weights: Weights to evaluate at.
        ridge: L2 penalty weight.

    Returns:
        Gradients indexed ``(task, d)``; zero rows for empty tasks.

    """
    phi = _skill_tensor(skills)
    n_tasks = weights.u.shape[0]
    counts = state_action_counts(dataset, phi.shape[0], phi.shape[1], n_tasks)
    grads = np.zeros_like(weights.u)
    for task in range(n_tasks):
        if counts[task].sum() > 0:
            grads[task] = _task_objective(phi, counts[task], weights.u[task], ridge)[1]
    return grads


def fitted_value_tables(skills: SkillSet, weights: TaskWeights) -> ValueTables:
    """
    Value tables implied by fitted weights: ``Q = phi^T u``, ``V = logsumexp_a Q``.

    Args:
        skills: Skill set.
        weights: Fitted weights.

    Returns:
        Value tables for every task.

    """
    q = q_from_weights(skills, weights.u)
    n_tasks = q.shape[0]
    return ValueTables(
        q_values=q,
        v_values=logsumexp(q, axis=-1),
        converged=(True,) * n_tasks,
        residuals=(0.0,) * n_tasks,
        iterations=(0,) * n_tasks,
    )


def recover_reward(
    skills: SkillSet, weights_u: TaskWeights, mdp_gamma: float, values: ValueTables
) -> tuple[TaskWeights, FloatArray]:
    """
    Recover reward weights ``w(t) = u(t) - gamma * sum_s' V(s',t) mu_q(s')``.

    Args:
        skills: Skill set.
        weights_u: Fitted policy weights.
        mdp_gamma: Discount factor in ``[0, 1)``.
        values: Value tables computed from the fitted Q (not ground truth).

    Returns:
        Weights with ``w`` filled, and the reward table ``(task, s, a)``.

    Raises:
        ShapeMismatchError: If the value tables do not match the skills.
        ConfigurationError: If gamma is outside ``[0, 1)``.

    """
    if not 0.0 <= mdp_gamma < 1.0:
        raise ConfigurationError(f"Discount gamma={mdp_gamma} must lie in [0, 1)")
    u = weights_u.u
    v = values.v_values
    if v.shape != (u.shape[0], skills.mu_q.shape[0]):
        raise ShapeMismatchError(
            f"State values {v.shape} do not match (tasks={u.shape[0]}, "
            f"states={skills.mu_q.shape[0]})"
        )
    if u.shape[1] != skills.rank_d:
        raise ShapeMismatchError(f"Weights have {u.shape[1]} skills, expected {skills.rank_d}")
    w = u - mdp_gamma * (v @ skills.mu_q)
    rewards = q_from_weights(skills, w)
    recovered = TaskWeights(
        u=u, w=w, empty_tasks=weights_u.empty_tasks, converged=weights_u.converged
    )
    return recovered, rewards


def consistency_residual(
    skills: SkillSet, weights: TaskWeights, gamma: float, values: ValueTables
) -> float:
    """
    Largest gap between ``phi^T u`` and ``phi^T w + gamma * P_hat V``.

    ``P_hat`` is the rank-d reconstruction ``phi mu_q^T``; the identity holds
    exactly in exact arithmetic.

    Args:
        skills: Skill set.
        weights: Weights with ``w`` filled.
        gamma: Discount factor used for recovery.
        values: Value tables used for recovery.

    Returns:
        Sup-norm of the difference.

    Raises:
        ConfigurationError: If ``w`` is missing.

    """
    if weights.w is None:
        raise ConfigurationError("Weights carry no recovered reward weights")
    n_states = skills.mu_q.shape[0]
    p_hat = skills.reconstruction()
    continuation = (p_hat @ values.v_values.T).T.reshape(weights.u.shape[0], n_states, -1)
    rebuilt = q_from_weights(skills, weights.w) + gamma * continuation
    return float(np.max(np.abs(rebuilt - q_from_weights(skills, weights.u))))


def top_weight_skills(
    weights: TaskWeights, task: int, k: int = 2, active: BoolArray | None = None
) -> IntArray:
    """
    Skills with the largest reward weight for a task, highest first.

    Zero-padded skills carry no structure and are skipped through ``active``.

    Args:
        weights: Weights with ``w`` filled (``u`` is used otherwise).
        task: Task index.
        k: Number of skills.
        active: Mask of skills eligible for ranking; all skills when omitted.

    Returns:
        Skill indices.

    """
    row = weights.u[task] if weights.w is None else weights.w[task]
    candidates = np.arange(row.shape[0]) if active is None else np.flatnonzero(active)
    order = np.argsort(-row[candidates], kind="stable")
    return candidates[order][:k].astype(np.int64)


def top_entries(column: FloatArray, k: int = 8, atol: float = 1e-12) -> IntArray:
    """
    Flattened ``(s, a)`` rows with the largest ``|phi|`` in one skill column.

    Rows with magnitude at or below ``atol`` are never returned.

    Args:
        column: One skill column over flattened ``(s, a)``.
        k: Maximum number of rows.
        atol: Magnitude below which a row is ignored.

    Returns:
        Row indices ordered by decreasing magnitude.

    """
    magnitude = np.abs(column)
    order = np.argsort(-magnitude, kind="stable")
    return order[magnitude[order] > atol][:k].astype(np.int64)
