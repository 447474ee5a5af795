"""Tabular benchmark environments: multi-task gridworld and binary-tree labyrinth."""

from collections import deque

import numpy as np
from mkdocs.plugins import get_plugin_logger

from .exceptions import ConfigurationError
from .models import (
    GRID_ACTIONS,
    LABYRINTH_ACTIONS,
    LABYRINTH_TASKS,
    FloatArray,
    GridworldSpec,
    LabyrinthSpec,
    TabularMDP,
)
from .validator import validate_gridworld_spec, validate_labyrinth_spec, validate_mdp

logger = get_plugin_logger(__name__)

# (row, col) offsets in GRID_ACTIONS order
GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _manhattan(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def build_gridworld(
    spec: GridworldSpec, gamma: float, reward_shape: str = "approach", horizon: int = 12
) -> TabularMDP:
    """
    Build a deterministic multi-task gridworld.

    States are cells in row-major order; actions are up, down, left, right.
    A move that would leave the grid keeps the state unchanged.

    Reward shapes for task ``i`` with goal ``g``:

    * ``approach``: 1 when the successor is strictly closer (Manhattan) to
      ``g`` than the state, and for the self-loops at ``g``; 0 otherwise.
    * ``successor``: ``1 - dist(s', g) / dist_max``, graded by how close the
      successor is to ``g``.

    Args:
        spec: Grid layout and goal cells.
        gamma: Discount factor.
        reward_shape: ``approach`` or ``successor``.
        horizon: Episode length recorded on the MDP.

    Returns:
        The gridworld MDP with one task per goal cell and uniform rho.

    Raises:
        ConfigurationError: If the spec or the reward shape is invalid.

    """
    validate_gridworld_spec(spec)
    n_states = spec.width * spec.height
    transition = np.zeros((n_states, len(GRID_ACTIONS), n_states))
    cells = [(r, c) for r in range(spec.height) for c in range(spec.width)]
    for s, (row, col) in enumerate(cells):
        for a, (dr, dc) in enumerate(GRID_MOVES):
            nr, nc = row + dr, col + dc
            if not (0 <= nr < spec.height and 0 <= nc < spec.width):
                nr, nc = row, col
            transition[s, a, spec.cell_index(nr, nc)] = 1.0

    rewards = np.zeros((len(spec.task_locations), n_states, len(GRID_ACTIONS)))
    dist_max = (spec.width - 1) + (spec.height - 1)
    for task, goal in enumerate(spec.task_locations):
        for s, cell in enumerate(cells):
            for a in range(len(GRID_ACTIONS)):
                nxt = cells[int(np.argmax(transition[s, a]))]
                rewards[task, s, a] = _grid_reward(cell, nxt, goal, dist_max, reward_shape)

    mdp = TabularMDP(
        transition=transition,
        rewards=rewards,
        gamma=gamma,
        rho=np.full(n_states, 1.0 / n_states),
        horizon=horizon,
        task_names=tuple(f"goal-{r}-{c}" for r, c in spec.task_locations),
        action_names=GRID_ACTIONS,
    )
    validate_mdp(mdp)
    logger.debug(f"Built {spec.width}x{spec.height} gridworld with {mdp.n_tasks} tasks")
    return mdp


def _grid_reward(
    cell: tuple[int, int],
    nxt: tuple[int, int],
    goal: tuple[int, int],
    dist_max: int,
    reward_shape: str,
) -> float:
    if reward_shape == "approach":
        if cell == goal and nxt == goal:
            return 1.0
        return 1.0 if _manhattan(nxt, goal) < _manhattan(cell, goal) else 0.0
    if reward_shape == "successor":
        if dist_max == 0:
            return 1.0
        return 1.0 - _manhattan(nxt, goal) / dist_max
    raise ConfigurationError(f"Unknown gridworld reward shape '{reward_shape}'")


def labyrinth_parent(node: int) -> int | None:
    """Parent of a node in breadth-first numbering, ``None`` for the root."""
    return None if node == 0 else (node - 1) // 2


def labyrinth_target(node: int, action: int, n_nodes: int) -> int | None:
    """
    Node reached by an action, or ``None`` when the target does not exist.

    ``left-parent`` is valid only from a left child and ``right-parent`` only
    from a right child.

    Args:
        node: Current node.
        action: Index into ``LABYRINTH_ACTIONS``.
        n_nodes: Number of nodes in the tree.

    Returns:
        The target node or ``None``.

    """
    name = LABYRINTH_ACTIONS[action]
    if name in ("left-parent", "right-parent"):
        if node == 0:
            return None
        is_left = node % 2 == 1
        if (name == "left-parent") != is_left:
            return None
        return labyrinth_parent(node)
    child = 2 * node + (1 if name == "left-child" else 2)
    return child if child < n_nodes else None


def labyrinth_path(a: int, b: int) -> list[int]:
    """
    Nodes on the tree path from ``a`` to ``b``, both included.

    Args:
        a: Start node.
        b: End node.

    Returns:
        Ordered list of nodes.

    """
    up_a = [a]
    while up_a[-1] != 0:
        up_a.append((up_a[-1] - 1) // 2)
    up_b = [b]
    while up_b[-1] != 0:
        up_b.append((up_b[-1] - 1) // 2)
    common = set(up_a) & set(up_b)
    head = []
    for node in up_a:
        head.append(node)
        if node in common:
            break
    tail = []
    for node in up_b:
        if node in common:
            break
        tail.append(node)
    return head + tail[::-1]


def build_labyrinth(
    spec: LabyrinthSpec,
    gamma: float,
    explore_reward: float = 0.05,
    horizon: int = 16,
) -> TabularMDP:
    """
    Build the binary-tree labyrinth with the water, home and explore tasks.

    Rewards are attached to the successor: the water task pays 1 for every
    transition whose successor is the port (staying there included), the
    home task likewise for the home node, and the explore task pays
    ``explore_reward`` everywhere except on transitions into the port.

    Args:
        spec: Tree depth and special nodes.
        gamma: Discount factor.
        explore_reward: Uniform reward of the explore task.
        horizon: Episode length recorded on the MDP.

    Returns:
        The labyrinth MDP with uniform rho.

    Raises:
        ConfigurationError: If the spec is invalid.

    """
    validate_labyrinth_spec(spec)
    n = spec.n_nodes
    port = spec.resolved_port
    transition = np.zeros((n, len(LABYRINTH_ACTIONS), n))
    for node in range(n):
        for a in range(len(LABYRINTH_ACTIONS)):
            target = labyrinth_target(node, a, n)
            transition[node, a, node if target is None else target] = 1.0

    successor = transition.argmax(axis=2)
    rewards = np.zeros((len(LABYRINTH_TASKS), n, len(LABYRINTH_ACTIONS)))
    rewards[0] = (successor == port).astype(float)
    rewards[1] = (successor == spec.home_node).astype(float)
    rewards[2] = np.where(successor == port, 0.0, explore_reward)

    mdp = TabularMDP(
        transition=transition,
        rewards=rewards,
        gamma=gamma,
        rho=np.full(n, 1.0 / n),
        horizon=horizon,
        task_names=LABYRINTH_TASKS,
        action_names=LABYRINTH_ACTIONS,
    )
    validate_mdp(mdp)
    logger.debug(f"Built depth-{spec.depth} labyrinth with {n} nodes, port {port}")
    return mdp


def reachable_states(mdp: TabularMDP, start: int) -> set[int]:
    """
    States reachable from ``start`` through positive-probability transitions.

    Args:
        mdp: The MDP to explore.
        start: Start state.

    Returns:
        Set of reachable states, ``start`` included.

    """
    adjacency: FloatArray = mdp.transition.sum(axis=1)
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for nxt in np.flatnonzero(adjacency[s] > 0):
            if int(nxt) not in seen:
                seen.add(int(nxt))
                queue.append(int(nxt))
    return seen
