"""
shared fixtures for the root-level test files.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from datagen.generate import generate_expert, generate_play
from envs.layout import parse_layout
from envs.maze import GridMaze, PointMaze, make_env, pairwise_distance

TREE_LAYOUT = """\
gcttt-maze v1 5 7 1.0
#######
#S...G#
###G###
#G...G#
#######
"""

CORRIDOR_LAYOUT = """\
gcttt-maze v1 3 7 1.0
#######
#S...G#
#######
"""


@pytest.fixture(scope="session")
def grid_env() -> GridMaze:
    return make_env("grid", "grid-medium")


@pytest.fixture(scope="session")
def point_env() -> PointMaze:
    return make_env("point", "point-medium")


@pytest.fixture(scope="session")
def tree_env() -> GridMaze:
    return GridMaze(parse_layout(TREE_LAYOUT, "tree"), episode_cap=30)


@pytest.fixture(scope="session")
def corridor_env() -> GridMaze:
    return GridMaze(parse_layout(CORRIDOR_LAYOUT, "corridor"), episode_cap=20)


@pytest.fixture(scope="session")
def grid_expert_ds(grid_env):
    return generate_expert(grid_env, 40, noise=0.0, seed=3)


@pytest.fixture(scope="session")
def grid_play_ds(grid_env):
    return generate_play(grid_env, 60, n_waypoints=3, seed=5, leg_cap=6, noise=0.1)


@pytest.fixture(scope="session")
def point_expert_ds(point_env):
    return generate_expert(point_env, 10, noise=0.1, seed=7)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def linear_scan(ds, state: np.ndarray, epsilon: float) -> list[tuple[int, int]]:
    """(trajectory, offset) of every stored state strictly within epsilon, by exhaustive scan."""
    return [
        (i, t)
        for i, traj in enumerate(ds.trajectories)
        for t in range(len(traj.states))
        if pairwise_distance(traj.states[t], state) < epsilon
    ]
