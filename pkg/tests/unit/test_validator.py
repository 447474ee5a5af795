"""Unit tests for the domain validators."""

from dataclasses import replace

import numpy as np
import pytest
from mkdocs.exceptions import PluginError

from skillbasis.exceptions import ConfigurationError, DataError, ShapeMismatchError
from skillbasis.models import GridworldSpec, LabyrinthSpec, Policy, TabularMDP
from skillbasis.validator import (
    validate_discrete_dataset,
    validate_gridworld_spec,
    validate_labyrinth_spec,
    validate_mdp,
    validate_policy_shape,
    validate_time_index,
)
from tests.fixtures.builders import discrete_dataset, random_mdp


def _with(mdp: TabularMDP, **changes) -> TabularMDP:
    data = {
        "transition": mdp.transition,
        "rewards": mdp.rewards,
        "gamma": mdp.gamma,
        "rho": mdp.rho,
    }
    data.update(changes)
    return TabularMDP(**data)


class TestValidateMdp:
    """Unit tests for MDP validation."""

    def test_valid_mdp(self, rng):
        """Test that a random MDP passes."""
        validate_mdp(random_mdp(rng))

    def test_row_not_summing_to_one(self, rng):
        """Test that a broken transition row is named."""
        mdp = random_mdp(rng)
        transition = mdp.transition.copy()
        transition[1, 2] *= 0.5
        with pytest.raises(ConfigurationError, match=r"\(1, 2\)"):
            validate_mdp(_with(mdp, transition=transition))

    def test_negative_probability(self, rng):
        """Test that negative probabilities are rejected."""
        mdp = random_mdp(rng)
        transition = mdp.transition.copy()
        transition[0, 0, 0] = -0.1
        transition[0, 0, 1] += 0.1
        with pytest.raises(ConfigurationError, match="Negative"):
            validate_mdp(_with(mdp, transition=transition))

    def test_reward_shape_mismatch(self, rng):
        """Test that rewards of the wrong shape are a shape error."""
        mdp = random_mdp(rng, n_states=5, n_actions=3)
        with pytest.raises(ShapeMismatchError):
            validate_mdp(_with(mdp, rewards=np.zeros((1, 5, 2))))

    def test_reward_out_of_range(self, rng):
        """Test that rewards above 1 are rejected."""
        mdp = random_mdp(rng)
        with pytest.raises(ConfigurationError, match=r"\[0, 1\]"):
            validate_mdp(_with(mdp, rewards=mdp.rewards + 1.0))

    @pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5])
    def test_gamma_outside_open_interval(self, rng, gamma):
        """Test that gamma must lie strictly between 0 and 1."""
        with pytest.raises(ConfigurationError, match="gamma"):
            validate_mdp(_with(random_mdp(rng), gamma=gamma))

    def test_rho_not_a_distribution(self, rng):
        """Test that rho must sum to one."""
        mdp = random_mdp(rng)
        with pytest.raises(ConfigurationError, match="rho"):
            validate_mdp(_with(mdp, rho=np.ones(mdp.n_states)))

    def test_errors_are_plugin_errors(self, rng):
        """Test that validation errors keep the PluginError base class."""
        with pytest.raises(PluginError):
            validate_mdp(_with(random_mdp(rng), gamma=2.0))


class TestValidateSpecs:
    """Unit tests for layout validation."""

    def test_goal_outside_grid(self):
        """Test that goals outside the grid are rejected."""
        with pytest.raises(ConfigurationError, match="outside"):
            validate_gridworld_spec(GridworldSpec(2, 2, ((2, 0),)))

    def test_grid_without_tasks(self):
        """Test that a grid needs at least one task."""
        with pytest.raises(ConfigurationError, match="at least one task"):
            validate_gridworld_spec(GridworldSpec(2, 2))

    def test_labyrinth_depth_zero(self):
        """Test that depth 0 is rejected."""
        with pytest.raises(ConfigurationError, match="depth"):
            validate_labyrinth_spec(LabyrinthSpec(depth=0))

    def test_labyrinth_port_outside_tree(self):
        """Test that the port must be a node of the tree."""
        with pytest.raises(ConfigurationError, match="port_node"):
            validate_labyrinth_spec(LabyrinthSpec(depth=1, port_node=3))


class TestValidateData:
    """Unit tests for policy and dataset validation."""

    def test_policy_shape(self, rng):
        """Test that a policy for another MDP size is rejected."""
        mdp = random_mdp(rng, n_states=5, n_actions=3)
        with pytest.raises(ShapeMismatchError):
            validate_policy_shape(mdp, Policy(np.full((1, 5, 2), 0.5)))

    def test_dataset_index_out_of_range(self):
        """Test that indices beyond the space are a data error."""
        data = discrete_dataset([0, 3], [0, 0], [1, 1], tasks=[0, 0])
        with pytest.raises(DataError, match="state"):
            validate_discrete_dataset(data, n_states=3, n_actions=1)

    def test_dataset_requires_tasks(self):
        """Test that task labels are required when a task count is given."""
        data = discrete_dataset([0], [0], [1])
        with pytest.raises(DataError, match="task labels"):
            validate_discrete_dataset(data, 2, 1, n_tasks=1)

    def test_time_index_must_increase(self):
        """Test that repeated time indices within an episode are rejected."""
        data = discrete_dataset([0, 1], [0, 0], [1, 0])
        broken = data.subset(np.array([0, 0]))
        with pytest.raises(ConfigurationError, match="increasing"):
            validate_time_index(broken)

    def test_missing_time_index(self):
        """Test that missing time indices are rejected."""
        data = discrete_dataset([0], [0], [1])
        with pytest.raises(ConfigurationError, match="no time"):
            validate_time_index(replace(data, time_index=None))
