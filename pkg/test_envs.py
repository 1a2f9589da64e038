"""
maze layouts, dynamics, reward and shortest-path helpers.
"""

import numpy as np
import pytest

from common.errors import ConfigurationError, MissingArtifactError
from conftest import CORRIDOR_LAYOUT, TREE_LAYOUT
from envs.layout import layout_to_text, load_layout, parse_layout
from envs.maze import MOVES, STAY, GridMaze, PointMaze, make_env


def test_shipped_layouts_load():
    grid = load_layout("grid-medium")
    point = load_layout("point-medium")
    assert grid.shape == point.shape == (11, 11)
    assert point.cell_size == 4.0
    assert len(grid.goals) == 4
    assert grid.starts == ((1, 1),)
    assert np.array_equal(grid.walls, point.walls)


def test_layout_text_round_trip():
    layout = parse_layout(TREE_LAYOUT, "tree")
    again = parse_layout(layout_to_text(layout), "tree")
    assert np.array_equal(again.walls, layout.walls)
    assert again.starts == layout.starts and again.goals == layout.goals


def test_missing_layout():
    with pytest.raises(MissingArtifactError):
        load_layout("no-such-maze")


@pytest.mark.parametrize(
    "text",
    [
        "gcttt-maze v1 3 3 1.0\n###\n#.#\n###\n",  # one free cell
        "gcttt-maze v1 3 4 1.0\n#..#\n#..#\n####\n",  # open border
        "gcttt-maze v1 3 5 1.0\n#####\n#.#.#\n#####\n",  # disconnected
        "gcttt-maze v1 3 4 1.0\n####\n#.x#\n####\n",  # unknown character
        "gcttt-maze v9 3 4 1.0\n####\n#..#\n####\n",  # version
        "gcttt-maze v1 4 4 1.0\n####\n#..#\n####\n",  # row count
    ],
)
def test_bad_layouts_are_rejected(text):
    with pytest.raises(ConfigurationError):
        parse_layout(text)


def test_eval_goals_need_exactly_four(tree_env, corridor_env):
    goals = tree_env.eval_goals()
    assert [g.goal_id for g in goals] == [0, 1, 2, 3]
    assert goals[0].cell == (1, 5)
    np.testing.assert_array_equal(goals[0].goal, [5.5, 1.5])
    with pytest.raises(ConfigurationError):
        corridor_env.eval_goals()


def test_unknown_env_kind():
    with pytest.raises(ConfigurationError):
        make_env("ant", "grid-medium")


def test_reward_is_strict_at_epsilon(grid_env):
    goal = np.array([1.5, 1.5])
    eps = grid_env.epsilon
    assert grid_env.reward(goal + [eps - 1e-9, 0.0], goal) == 0.0
    assert grid_env.reward(goal + [eps, 0.0], goal) == -1.0
    assert grid_env.reward(goal, goal) == 0.0
    np.testing.assert_array_equal(grid_env.reward(np.array([[1.5, 1.5], [3.5, 1.5]]), goal), [0.0, -1.0])


def test_grid_step_moves_and_blocks(corridor_env):
    start = corridor_env.cell_center((1, 1))
    north = corridor_env.move_action(0)
    east = corridor_env.move_action(1)
    assert np.array_equal(corridor_env.step(start, north), start)
    np.testing.assert_array_equal(corridor_env.step(start, east), [2.5, 1.5])
    np.testing.assert_array_equal(corridor_env.step(start, np.array([0.05, -0.02])), start)


def test_grid_snap_rounds_continuous_actions(grid_env):
    assert grid_env.snap(np.array([0.9, 0.2])) == 1
    assert grid_env.snap(np.array([-0.1, -0.8])) == 0
    assert grid_env.snap(np.array([0.1, 0.1])) == STAY


def test_clip_action_counts(grid_env):
    before = grid_env.clip_count
    clipped, was = grid_env.clip_action(np.array([5.0, -0.5]))
    np.testing.assert_array_equal(clipped, [1.0, -0.5])
    assert was
    _, was = grid_env.clip_action(np.array([0.5, 0.5]))
    assert not was
    assert grid_env.clip_count == before + 1


def test_reset_is_deterministic_per_seed(point_env, grid_env):
    np.testing.assert_array_equal(point_env.reset(4), point_env.reset(4))
    np.testing.assert_array_equal(grid_env.reset(0), grid_env.cell_center((1, 1)))
    assert point_env.cell_of(point_env.reset(9)) == (1, 1)


def test_point_maze_stops_at_wall_face(point_env):
    state = point_env.cell_center((1, 1))
    west = np.array([-2.0, 0.0])
    for _ in range(5):
        state = point_env.step(state, west)
    assert state[0] == pytest.approx(4.0 + point_env.margin, abs=1e-6)
    assert state[1] == 6.0
    assert point_env.in_free_space(state)


def test_point_maze_never_enters_walls(point_env):
    rng = np.random.default_rng(0)
    state = point_env.reset(rng)
    for _ in range(2000):
        state = point_env.step(state, rng.uniform(-3.0, 3.0, size=2))
        assert point_env.in_free_space(state)


def test_point_action_scale_override():
    env = PointMaze(load_layout("point-medium"), action_scale=1.0)
    assert env.action_max == 1.0
    with pytest.raises(ConfigurationError):
        PointMaze(load_layout("point-medium"), action_scale=0.0)


def test_bfs_distances(tree_env):
    assert tree_env.bfs_distance((1, 1), (1, 5)) == 4
    assert tree_env.bfs_distance((1, 1), (3, 1)) == 6
    assert tree_env.optimal_moves((1, 3), (3, 3)) == [2]
    assert tree_env.optimal_moves((3, 5), (3, 5)) == [STAY]
    assert tree_env.next_cell_toward((1, 1), (3, 1)) == (1, 2)


def test_feasible_moves_include_stay(corridor_env):
    assert corridor_env.feasible_moves((1, 1)) == [1, STAY]
    assert set(corridor_env.feasible_moves((1, 3))) == {1, 3, STAY}


def test_encode_maps_into_unit_box(grid_env):
    corners = np.array([[0.0, 0.0], [11.0, 11.0]])
    obs = grid_env.encode(corners, np.array([5.5, 5.5]))
    np.testing.assert_array_equal(obs, [[-1.0, -1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]])


def test_moves_table():
    assert MOVES.shape == (5, 2)
    assert np.array_equal(MOVES[STAY], [0.0, 0.0])
    assert isinstance(make_env("grid", parse_layout(CORRIDOR_LAYOUT)), GridMaze)


FOUR_START_LAYOUT = """\
gcttt-maze v1 5 6 1.0
######
#S..S#
#.GG.#
#S..S#
######
"""


def test_reset_spreads_evenly_over_designated_starts():
    env = GridMaze(parse_layout(FOUR_START_LAYOUT, "four-start"))
    n = 10_000
    counts = {cell: 0 for cell in env.layout.starts}
    for seed in range(n):
        counts[env.cell_of(env.reset(seed))] += 1
    assert len(counts) == 4 and sum(counts.values()) == n
    sigma = np.sqrt(0.25 * 0.75 / n)
    for cell, count in counts.items():
        assert abs(count / n - 0.25) <= 3 * sigma, cell


@pytest.mark.parametrize("env_name", ["grid_env", "point_env"])
def test_every_eval_goal_is_reachable_from_every_start(env_name, request):
    env = request.getfixturevalue(env_name)
    for goal in env.eval_goals():
        distances = env.distances_to(goal.cell)
        for start in env.layout.start_cells():
            assert start in distances, (start, goal.cell)
            assert 0 <= env.bfs_distance(start, goal.cell) < len(env.layout.free_cells)
