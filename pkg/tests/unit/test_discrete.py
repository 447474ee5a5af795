"""Unit tests for skill factorization, policy fitting and reward recovery."""

import numpy as np
import pytest
from scipy.stats import ortho_group

from skillbasis.discrete import (
    consistency_residual,
    factorize_matrix,
    factorize_transitions,
    fit_policy_weights_mle,
    fitted_value_tables,
    mle_gradient,
    policy_from_weights,
    q_from_weights,
    recover_reward,
    top_entries,
    top_weight_skills,
)
from skillbasis.exceptions import ConfigurationError, ShapeMismatchError
from skillbasis.models import SkillSet, TaskWeights
from skillbasis.solver import sample_trajectories, softmax_policy, solve_all_tasks, task_schedule
from tests.fixtures.builders import discrete_dataset, random_mdp


class TestFactorization:
    """Unit tests for the truncated factorization."""

    def test_full_rank_reconstructs(self, gridworld_3x3):
        """Test that rank |S| reproduces the transition matrix."""
        skills = factorize_transitions(gridworld_3x3, rank_d=9)
        np.testing.assert_allclose(
            skills.reconstruction(), gridworld_3x3.flat_transition, atol=1e-10
        )
        np.testing.assert_allclose(skills.mu_q.T @ skills.mu_q, np.eye(9), atol=1e-10)

    def test_truncation_error_matches_dropped_values(self, rng):
        """Test that the rank-d residual is the norm of the dropped singular values."""
        matrix = rng.standard_normal((12, 5))
        skills = factorize_matrix(matrix, rank_d=3)
        s = np.linalg.svd(matrix, compute_uv=False)
        residual = np.linalg.norm(matrix - skills.reconstruction())
        assert residual == pytest.approx(np.sqrt(np.sum(s[3:] ** 2)))
        np.testing.assert_allclose(skills.singular_values, s[:3])

    def test_sign_convention(self, rng):
        """Test that the largest entry of every skill column is positive."""
        skills = factorize_matrix(rng.standard_normal((10, 4)), rank_d=4)
        for j in range(4):
            column = skills.phi[:, j]
            assert column[np.argmax(np.abs(column))] > 0

    def test_degenerate_block_uses_canonical_basis(self):
        """Test that equal singular values get the coordinate basis."""
        skills = factorize_matrix(np.eye(3), rank_d=3)
        np.testing.assert_allclose(skills.phi, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(skills.mu_q, np.eye(3), atol=1e-12)

    def test_rank_above_bound_is_padded(self, rng):
        """Test that extra skills are zero columns."""
        skills = factorize_matrix(rng.standard_normal((6, 3)), rank_d=5)
        assert skills.phi.shape == (6, 5)
        assert np.all(skills.phi[:, 3:] == 0.0)
        assert np.all(skills.singular_values[3:] == 0.0)

    def test_random_mdp_oracle(self, rng):
        """Test reconstruction and truncation error on many random MDPs."""
        for _ in range(50):
            n_states = int(rng.integers(2, 13))
            mdp = random_mdp(rng, n_states=n_states, n_actions=4, n_tasks=1)
            matrix = mdp.flat_transition
            full = factorize_transitions(mdp, rank_d=n_states)
            assert np.linalg.norm(matrix - full.reconstruction()) <= 1e-8
            rank = max(1, n_states // 2)
            truncated = factorize_transitions(mdp, rank_d=rank)
            tail = np.linalg.svd(matrix, compute_uv=False)[rank:]
            residual = np.linalg.norm(matrix - truncated.reconstruction())
            assert abs(residual - np.sqrt(np.sum(tail**2))) <= 1e-8

    def test_invalid_rank(self, rng):
        """Test that rank 0 is rejected."""
        with pytest.raises(ConfigurationError):
            factorize_matrix(rng.standard_normal((3, 3)), rank_d=0)

    def test_transition_override_shape(self, gridworld_3x3):
        """Test that a replacement tensor must match the MDP."""
        with pytest.raises(ShapeMismatchError):
            factorize_transitions(gridworld_3x3, 4, transition=np.ones((9, 3, 9)) / 9)


@pytest.fixture
def fitted(rng):
    """Random MDP, its skills, sampled data and fitted weights."""
    mdp = random_mdp(rng, n_states=4, n_actions=3, n_tasks=2)
    skills = factorize_transitions(mdp, rank_d=4)
    policy = softmax_policy(solve_all_tasks(mdp))
    data = sample_trajectories(mdp, policy, 60, 10, task_schedule(2, 30), seed=9)
    weights = fit_policy_weights_mle(data, skills, n_tasks=2, ridge=0.1, tol=1e-7)
    return mdp, skills, data, weights


class TestPolicyFit:
    """Unit tests for the per-task maximum likelihood fit."""

    def test_stationary_point(self, fitted):
        """Test that the fitted weights zero the gradient."""
        _, skills, data, weights = fitted
        assert weights.converged == (True, True)
        grads = mle_gradient(data, skills, weights, ridge=0.1)
        assert np.max(np.abs(grads)) <= 1e-6

    def test_policy_is_softmax_of_q(self, fitted):
        """Test the softmax-linear policy."""
        _, skills, _, weights = fitted
        q = q_from_weights(skills, weights.u)
        pi = policy_from_weights(skills, weights.u)
        assert q.shape == (2, 4, 3)
        np.testing.assert_allclose(pi.sum(axis=-1), 1.0)
        np.testing.assert_allclose(
            np.log(pi[0, 1]) - np.log(pi[0, 1, 0]), q[0, 1] - q[0, 1, 0], atol=1e-10
        )

    def test_balanced_uniform_data_keeps_uniform_policy(self, gridworld_3x3):
        """Test that every action once per state gives a zero gradient and a uniform fit."""
        skills = factorize_transitions(gridworld_3x3, rank_d=9)
        pairs = [(s, a) for s in range(9) for a in range(4)]
        data = discrete_dataset(
            [s for s, _ in pairs],
            [a for _, a in pairs],
            [gridworld_3x3.successor(s, a) for s, a in pairs],
            tasks=[0] * len(pairs),
        )
        at_zero = mle_gradient(data, skills, TaskWeights(u=np.zeros((1, 9))))
        assert np.max(np.abs(at_zero)) <= 1e-12
        weights = fit_policy_weights_mle(data, skills, n_tasks=1)
        pi = policy_from_weights(skills, weights.u)[0]
        assert np.max(0.5 * np.abs(pi - 0.25).sum(axis=1)) <= 1e-3

    def test_single_pair_concentrates(self, gridworld_3x3):
        """Test that one repeated pair drives its action probability above 0.95."""
        skills = factorize_transitions(gridworld_3x3, rank_d=9)
        data = discrete_dataset([0] * 20, [1] * 20, [3] * 20, tasks=[0] * 20)
        weights = fit_policy_weights_mle(data, skills, n_tasks=1, ridge=1e-4)
        assert np.all(np.isfinite(weights.u))
        assert policy_from_weights(skills, weights.u)[0, 0, 1] > 0.95

    def test_empty_task(self, fitted):
        """Test that a task without data keeps zero weights."""
        _, skills, data, _ = fitted
        only_first = data.subset(data.tasks == 0)
        weights = fit_policy_weights_mle(only_first, skills, n_tasks=2, ridge=0.1)
        assert weights.empty_tasks == (1,)
        assert np.all(weights.u[1] == 0.0)
        assert weights.converged[1] is False


class TestRewardRecovery:
    """Unit tests for reward weight recovery."""

    def test_recovery_formula(self, fitted):
        """Test w = u - gamma * V mu_q."""
        mdp, skills, _, weights = fitted
        values = fitted_value_tables(skills, weights)
        recovered, rewards = recover_reward(skills, weights, mdp.gamma, values)
        assert recovered.w is not None
        expected = weights.u - mdp.gamma * values.v_values @ skills.mu_q
        np.testing.assert_allclose(recovered.w, expected)
        np.testing.assert_allclose(rewards, q_from_weights(skills, expected))

    def test_consistency_residual_vanishes(self, fitted):
        """Test that phi^T u equals phi^T w + gamma * P_hat V."""
        mdp, skills, _, weights = fitted
        values = fitted_value_tables(skills, weights)
        recovered, _ = recover_reward(skills, weights, mdp.gamma, values)
        assert consistency_residual(skills, recovered, mdp.gamma, values) < 1e-9

    def test_rotation_invariance(self, fitted, rng):
        """Test that rotating phi, mu_q and u together leaves the recovered reward unchanged."""
        mdp, skills, _, weights = fitted
        original, rewards = recover_reward(
            skills, weights, mdp.gamma, fitted_value_tables(skills, weights)
        )
        rotation = ortho_group.rvs(dim=skills.rank_d, random_state=rng)
        rotated = SkillSet(
            phi=skills.phi @ rotation,
            mu_q=skills.mu_q @ rotation,
            rank_d=skills.rank_d,
            singular_values=skills.singular_values,
        )
        turned = TaskWeights(u=weights.u @ rotation)
        values = fitted_value_tables(rotated, turned)
        recovered, rotated_rewards = recover_reward(rotated, turned, mdp.gamma, values)
        np.testing.assert_allclose(rotated_rewards, rewards, rtol=0.0, atol=1e-10)
        np.testing.assert_allclose(recovered.w, original.w @ rotation, atol=1e-10)

    def test_zero_gamma_returns_u(self, fitted):
        """Test that without discounting the reward weights equal the policy weights."""
        _, skills, _, weights = fitted
        recovered, _ = recover_reward(skills, weights, 0.0, fitted_value_tables(skills, weights))
        np.testing.assert_allclose(recovered.w, weights.u)

    def test_invalid_inputs(self, fitted):
        """Test gamma and shape checks."""
        mdp, skills, _, weights = fitted
        values = fitted_value_tables(skills, weights)
        with pytest.raises(ConfigurationError):
            recover_reward(skills, weights, 1.0, values)
        narrow = TaskWeights(u=weights.u[:, :2])
        with pytest.raises(ShapeMismatchError):
            recover_reward(skills, narrow, mdp.gamma, values)
        with pytest.raises(ConfigurationError, match="no recovered"):
            consistency_residual(skills, weights, mdp.gamma, values)


class TestInterpretation:
    """Unit tests for ranking helpers."""

    def test_top_weight_skills(self):
        """Test ordering by reward weight, falling back to u."""
        weights = TaskWeights(u=np.array([[0.0, 5.0, 1.0]]))
        assert top_weight_skills(weights, 0, k=2).tolist() == [1, 2]
        with_w = TaskWeights(u=weights.u, w=np.array([[3.0, -1.0, 2.0]]))
        assert top_weight_skills(with_w, 0, k=2).tolist() == [0, 2]

    def test_top_weight_skills_skip_padding(self, rng):
        """Test that zero-padded skills never lead, even with the largest weight."""
        skills = factorize_matrix(rng.standard_normal((6, 3)), rank_d=5)
        active = skills.active()
        assert active.tolist() == [True, True, True, False, False]
        weights = TaskWeights(u=np.zeros((1, 5)), w=np.array([[-2.0, -1.0, -3.0, 0.0, 0.0]]))
        assert top_weight_skills(weights, 0, k=1).tolist() == [3]
        assert top_weight_skills(weights, 0, k=1, active=active).tolist() == [1]
        assert top_weight_skills(weights, 0, k=5, active=active).tolist() == [1, 0, 2]

    def test_top_entries_skip_zeros(self):
        """Test that zero rows are never returned."""
        column = np.array([0.0, -3.0, 1.0, 0.0])
        assert top_entries(column, k=8).tolist() == [1, 2]

    def test_skill_set_shape_check(self):
        """Test that phi rows must be a multiple of the state count."""
        skills = SkillSet(phi=np.ones((5, 2)), mu_q=np.ones((2, 2)), rank_d=2)
        with pytest.raises(ShapeMismatchError):
            q_from_weights(skills, np.ones((1, 2)))
