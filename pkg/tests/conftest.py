"""Shared test fixtures for the skillbasis test suite."""

import shutil
import tempfile
from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest

from skillbasis.envs import build_gridworld, build_labyrinth
from skillbasis.models import GridworldSpec, LabyrinthSpec, TabularMDP


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for tests.

    Yields:
        Path to the temporary directory.
    """
    temp_dir = tempfile.mkdtemp()
    temp_path = Path(temp_dir)
    try:
        yield temp_path
    finally:
        shutil.rmtree(temp_dir)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator.

    Returns:
        Generator with seed 1234.
    """
    return np.random.default_rng(1234)


@pytest.fixture
def gridworld_3x3() -> TabularMDP:
    """3x3 gridworld with one task per cell.

    Returns:
        The MDP with the successor reward shape.
    """
    return build_gridworld(GridworldSpec.every_cell(3, 3), 0.9, "successor")


@pytest.fixture
def labyrinth_depth2() -> TabularMDP:
    """Depth-2 labyrinth (7 nodes).

    Returns:
        The MDP.
    """
    return build_labyrinth(LabyrinthSpec(depth=2), 0.9)
