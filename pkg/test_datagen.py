"""
offline data generation, the dataset file format and the relevance index.
"""

import struct
import zlib

import numpy as np
import pytest

from common.errors import ConfigurationError, FormatVersionError, IntegrityError, MissingArtifactError, ShapeError
from conftest import linear_scan
from datagen.dataset_io import dataset_from_bytes, dataset_to_bytes, load_dataset, save_dataset
from datagen.generate import generate_expert, generate_play
from datagen.trajectories import OfflineDataset, Trajectory
from datagen.window_index import _neighbour_buckets, build_index, query_ball, query_positions


def test_noise_free_expert_follows_shortest_paths(grid_env, grid_expert_ds):
    for traj in grid_expert_ds.trajectories:
        start = grid_env.cell_of(traj.states[0])
        goal = grid_env.cell_of(traj.goal)
        assert traj.length == grid_env.bfs_distance(start, goal)
        assert grid_env.is_success(traj.states[-1], traj.goal)


def test_expert_data_replays_exactly(grid_env, point_env, grid_expert_ds, point_expert_ds):
    assert grid_expert_ds.replay_check(grid_env)
    assert point_expert_ds.replay_check(point_env)


def test_play_data_replays_exactly(grid_env, grid_play_ds):
    assert grid_play_ds.replay_check(grid_env)
    assert grid_play_ds.metadata["leg_cap"] == 6
    assert all(t.source_tag == "play" for t in grid_play_ds.trajectories)


def test_point_expert_states_stay_in_free_space(point_env, point_expert_ds):
    assert all(point_env.in_free_space(s) for s in point_expert_ds.flat_states)


def test_generation_is_deterministic(grid_env):
    a = generate_play(grid_env, 12, seed=21, leg_cap=6)
    b = generate_play(grid_env, 12, seed=21, leg_cap=6)
    assert a == b
    assert dataset_to_bytes(a) == dataset_to_bytes(b)
    assert a != generate_play(grid_env, 12, seed=22, leg_cap=6)


def test_play_legs_bound_trajectory_extent(grid_env, grid_play_ds):
    # two legs of at most 6 steps each
    for traj in grid_play_ds.trajectories:
        first = grid_env.cell_of(traj.states[0])
        dist = grid_env.distances_to(first)
        assert traj.length <= 12
        assert max(dist[grid_env.cell_of(s)] for s in traj.states) <= 12


def test_play_data_requires_stitching(grid_env, grid_play_ds):
    start = grid_env.cell_center(grid_env.layout.starts[0])
    eps = grid_env.epsilon
    near_start = {i for i, _ in linear_scan(grid_play_ds, start, eps)}
    unspanned = []
    for goal in grid_env.eval_goals():
        near_goal = {i for i, _ in linear_scan(grid_play_ds, goal.goal, eps)}
        if not near_start & near_goal:
            unspanned.append(goal.cell)
    assert (1, 9) in unspanned


def test_generator_arguments_are_checked(grid_env):
    with pytest.raises(ConfigurationError):
        generate_expert(grid_env, 0)
    with pytest.raises(ConfigurationError):
        generate_expert(grid_env, 3, noise=1.0)
    with pytest.raises(ConfigurationError):
        generate_play(grid_env, 3, n_waypoints=1)


def test_flat_views(grid_expert_ds):
    ds = grid_expert_ds
    assert len(ds.flat_states) == ds.n_transitions + len(ds)
    first = ds.trajectories[0]
    end = ds.flat_end[0]
    assert end == first.length
    np.testing.assert_array_equal(ds.flat_actions[end], [0.0, 0.0])
    np.testing.assert_array_equal(ds.flat_states[ds.position(1, 2)], ds.trajectories[1].states[2])
    assert len(ds.transition_positions) == ds.n_transitions
    assert ds.flat_t[ds.position(2, 1)] == 1


def test_trajectory_shapes_are_checked():
    with pytest.raises(ConfigurationError):
        OfflineDataset((), "x", "expert")
    with pytest.raises(ShapeError):
        Trajectory(np.zeros((3, 2)), np.zeros((3, 2)), "expert")
    with pytest.raises(ConfigurationError):
        Trajectory(np.zeros((2, 2)), np.zeros((1, 2)), "robot")


def test_dataset_file_round_trip(tmp_path, grid_play_ds, point_expert_ds):
    for ds in (grid_play_ds, point_expert_ds):
        path = tmp_path / f"{ds.regime}.gcttds"
        save_dataset(ds, path)
        assert load_dataset(path) == ds


def test_corrupted_dataset_is_rejected(grid_expert_ds):
    blob = bytearray(dataset_to_bytes(grid_expert_ds))
    blob[40] ^= 0x01
    with pytest.raises(IntegrityError):
        dataset_from_bytes(bytes(blob))
    with pytest.raises(IntegrityError):
        dataset_from_bytes(bytes(blob[:5]))


def test_dataset_version_mismatch(grid_expert_ds):
    body = dataset_to_bytes(grid_expert_ds)[:-4].replace(b"GCTTDS v1\n", b"GCTTDS v2\n", 1)
    with pytest.raises(FormatVersionError):
        dataset_from_bytes(body + struct.pack("<I", zlib.crc32(body)))


def test_missing_dataset(tmp_path):
    with pytest.raises(MissingArtifactError):
        load_dataset(tmp_path / "none.gcttds")


def test_index_matches_linear_scan(grid_play_ds):
    index = build_index(grid_play_ds, 0.5)
    rng = np.random.default_rng(8)
    for _ in range(1000):
        state = rng.uniform(0.0, 11.0, size=2)
        eps = rng.choice([0.25, 0.5, 1.0, 2.3, np.inf])
        assert query_ball(index, state, eps) == linear_scan(grid_play_ds, state, eps)


def test_index_on_continuous_states(point_expert_ds):
    index = build_index(point_expert_ds, 2.0)
    rng = np.random.default_rng(9)
    for _ in range(200):
        state = rng.uniform(0.0, 44.0, size=2)
        eps = rng.uniform(0.1, 6.0)
        assert query_ball(index, state, eps) == linear_scan(point_expert_ds, state, eps)


def test_query_edge_cases(grid_expert_ds):
    index = build_index(grid_expert_ds, 0.5)
    assert query_positions(index, np.array([1.5, 1.5]), 0.0).size == 0
    assert query_positions(index, np.array([-50.0, -50.0]), 0.5).size == 0
    everything = query_positions(index, np.array([0.0, 0.0]), np.inf)
    np.testing.assert_array_equal(everything, np.arange(len(grid_expert_ds.flat_states)))
    with pytest.raises(ConfigurationError):
        build_index(grid_expert_ds, 0.0)


def test_neighbour_lookup_visits_only_nearby_buckets(point_expert_ds):
    index = build_index(point_expert_ds, 2.0)
    assert len(index.lookup) == index.n_buckets
    for key, b in index.lookup.items():
        np.testing.assert_array_equal(index.keys[b], key)
    low, high = np.array([3.0, 4.0]), np.array([6.0, 7.0])
    hit = _neighbour_buckets(index, low, high)
    inside = np.all((index.keys >= low) & (index.keys <= high), axis=1)
    assert sorted(hit) == list(np.flatnonzero(inside))
    assert len(hit) <= 16
