"""Unit tests for soft value iteration and demonstration sampling."""

from dataclasses import replace

import numpy as np
import pytest

from skillbasis.envs import build_gridworld
from skillbasis.exceptions import ConfigurationError, DataError
from skillbasis.models import GridworldSpec
from skillbasis.solver import (
    empirical_transitions,
    sample_trajectories,
    soft_bellman_backup,
    soft_value_iteration,
    softmax_policy,
    solve_all_tasks,
    state_action_counts,
    task_schedule,
)
from tests.fixtures.builders import discrete_dataset, random_mdp


class TestSoftValueIteration:
    """Unit tests for the soft Bellman solver."""

    def test_fixed_point(self, rng):
        """Test that the result satisfies the soft Bellman equation."""
        mdp = random_mdp(rng)
        values = soft_value_iteration(mdp, task=1, tol=1e-10)
        q = values.q_values[0]
        assert values.converged == (True,)
        np.testing.assert_allclose(soft_bellman_backup(mdp, 1, q), q, atol=1e-8)

    def test_value_is_logsumexp(self, rng):
        """Test that V is the log-sum-exp of Q over actions."""
        values = soft_value_iteration(random_mdp(rng), task=0)
        expected = np.log(np.exp(values.q_values[0]).sum(axis=1))
        np.testing.assert_allclose(values.v_values[0], expected)

    def test_iteration_cap_is_not_an_error(self, rng):
        """Test that hitting max_iters returns an unconverged slice."""
        values = soft_value_iteration(random_mdp(rng), task=0, max_iters=2)
        assert values.converged == (False,)
        assert values.iterations == (2,)
        assert values.residuals[0] > 0

    def test_invalid_arguments(self, rng):
        """Test tolerance and task checks."""
        mdp = random_mdp(rng, n_tasks=2)
        with pytest.raises(ConfigurationError, match="Tolerance"):
            soft_value_iteration(mdp, task=0, tol=0.0)
        with pytest.raises(ConfigurationError, match="Task 2"):
            soft_value_iteration(mdp, task=2)

    def test_all_tasks_and_policy(self, rng):
        """Test stacking over tasks and the softmax policy."""
        mdp = random_mdp(rng, n_tasks=3)
        values = solve_all_tasks(mdp)
        assert values.q_values.shape == (3, 5, 3)
        assert values.all_converged
        policy = softmax_policy(values)
        np.testing.assert_allclose(policy.probs.sum(axis=-1), 1.0)
        best = np.argmax(values.q_values, axis=-1)
        np.testing.assert_array_equal(np.argmax(policy.probs, axis=-1), best)

    def test_softmax_ignores_constant_shift(self, rng):
        """Test that adding a constant to every Q value leaves the policy unchanged."""
        values = solve_all_tasks(random_mdp(rng, n_tasks=2))
        shifted = replace(values, q_values=values.q_values + 37.5)
        np.testing.assert_allclose(
            softmax_policy(shifted).probs, softmax_policy(values).probs, rtol=0.0, atol=1e-12
        )


class TestGridworldPolicies:
    """Unit tests for the soft-optimal behaviour on the 3x3 gridworld."""

    @staticmethod
    def _final_state_distribution(mdp, task, horizon=12):
        probs = softmax_policy(solve_all_tasks(mdp)).probs[task]
        flow = np.einsum("sa,sat->st", probs, mdp.transition)
        dist = mdp.rho.copy()
        for _ in range(horizon):
            dist = dist @ flow
        return dist

    def test_center_task_moves_inward(self, gridworld_3x3):
        """Test that the best action of every off-centre cell steps towards the centre."""
        q = solve_all_tasks(gridworld_3x3).q_values[4]
        for state in range(9):
            if state == 4:
                continue
            row, col = divmod(state, 3)
            nxt = gridworld_3x3.successor(state, int(np.argmax(q[state])))
            n_row, n_col = divmod(nxt, 3)
            assert abs(n_row - 1) + abs(n_col - 1) < abs(row - 1) + abs(col - 1)

    def test_corner_task_collects_mass(self, gridworld_3x3):
        """Test that the bottom-right task ends more episodes at its goal than anywhere else."""
        dist = self._final_state_distribution(gridworld_3x3, task=8)
        assert dist[8] > 0.45
        assert int(np.argmax(dist)) == 8
        approach = build_gridworld(GridworldSpec.every_cell(3, 3), 0.9, "approach")
        assert self._final_state_distribution(approach, task=8)[8] > 0.55

    def test_sampled_episodes_end_at_goal(self, gridworld_3x3):
        """Test that sampled bottom-right episodes end at the goal most often."""
        policy = softmax_policy(solve_all_tasks(gridworld_3x3))
        data = sample_trajectories(gridworld_3x3, policy, 1000, 12, [8] * 1000, seed=21)
        final = data.next_states[data.time_index == 11]
        counts = np.bincount(final, minlength=9)
        assert int(np.argmax(counts)) == 8
        assert counts[8] / 1000 > 0.4


class TestSampling:
    """Unit tests for trajectory sampling."""

    def test_layout(self, gridworld_3x3):
        """Test the dataset layout of sampled episodes."""
        policy = softmax_policy(solve_all_tasks(gridworld_3x3))
        data = sample_trajectories(gridworld_3x3, policy, 4, 5, [0, 1, 2, 3], seed=11)
        assert len(data) == 20
        assert data.episodes.tolist() == [e for e in range(4) for _ in range(5)]
        assert data.time_index is not None
        assert data.time_index.tolist() == list(range(5)) * 4
        assert data.tasks is not None and data.tasks.tolist()[::5] == [0, 1, 2, 3]

    def test_consecutive_states_chain(self, gridworld_3x3):
        """Test that each next state is the following state and the true successor."""
        policy = softmax_policy(solve_all_tasks(gridworld_3x3))
        data = sample_trajectories(gridworld_3x3, policy, 2, 6, [4, 4], seed=3)
        for i in range(len(data)):
            assert data.next_states[i] == gridworld_3x3.successor(data.states[i], data.actions[i])
            if data.time_index[i] < 5:
                assert data.states[i + 1] == data.next_states[i]

    def test_episodes_do_not_depend_on_count(self, gridworld_3x3):
        """Test that adding episodes leaves earlier episodes unchanged."""
        policy = softmax_policy(solve_all_tasks(gridworld_3x3))
        short = sample_trajectories(gridworld_3x3, policy, 2, 4, [0, 1], seed=5)
        longer = sample_trajectories(gridworld_3x3, policy, 3, 4, [0, 1, 2], seed=5)
        np.testing.assert_array_equal(short.states, longer.states[:8])
        np.testing.assert_array_equal(short.actions, longer.actions[:8])

    def test_action_frequencies_match_policy(self, gridworld_3x3):
        """Test that sampled actions from one start state follow the policy within 3 sigma."""
        start = np.zeros(9)
        start[2] = 1.0
        mdp = replace(gridworld_3x3, rho=start)
        policy = softmax_policy(solve_all_tasks(mdp))
        n = 10_000
        data = sample_trajectories(mdp, policy, n, 1, [4] * n, seed=13)
        assert np.all(data.states == 2)
        freq = np.bincount(data.actions, minlength=4) / n
        p = policy.probs[4, 2]
        assert np.all(np.abs(freq - p) <= 3.0 * np.sqrt(p * (1.0 - p) / n))

    def test_schedule_length_mismatch(self, gridworld_3x3):
        """Test that the schedule must cover every episode."""
        policy = softmax_policy(solve_all_tasks(gridworld_3x3))
        with pytest.raises(ConfigurationError, match="schedule"):
            sample_trajectories(gridworld_3x3, policy, 3, 4, [0, 1], seed=0)

    def test_task_schedule(self):
        """Test the balanced task schedule."""
        assert task_schedule(2, 3).tolist() == [0, 0, 0, 1, 1, 1]


class TestCounts:
    """Unit tests for counting helpers."""

    def test_state_action_counts(self):
        """Test per-task counts."""
        data = discrete_dataset([0, 0, 1], [1, 1, 0], [1, 1, 0], tasks=[0, 0, 1])
        counts = state_action_counts(data, n_states=2, n_actions=2, n_tasks=2)
        assert counts[0, 0, 1] == 2.0
        assert counts[1, 1, 0] == 1.0
        assert counts.sum() == 3.0

    def test_empirical_transitions(self):
        """Test estimated rows and the uniform fallback for unseen pairs."""
        data = discrete_dataset([0, 0, 0, 1], [0, 0, 0, 1], [1, 1, 0, 1])
        estimate = empirical_transitions(data, n_states=2, n_actions=2)
        np.testing.assert_allclose(estimate[0, 0], [1 / 3, 2 / 3])
        np.testing.assert_allclose(estimate[0, 1], [0.5, 0.5])
        np.testing.assert_allclose(estimate[1, 1], [0.0, 1.0])

    def test_out_of_range_index(self):
        """Test that states beyond the space are rejected."""
        data = discrete_dataset([5], [0], [0])
        with pytest.raises(DataError):
            empirical_transitions(data, n_states=2, n_actions=1)
