"""
scripted offline data in two regimes.

expert: full noisy-optimal demonstrations between random start/goal pairs.
play: short capped legs between random waypoints, so reaching far goals requires
stitching pieces of different trajectories together.
"""

import logging

import numpy as np

from common.errors import ConfigurationError
from common.seeding import rng_for
from datagen.trajectories import OfflineDataset, Trajectory
from envs.maze import Maze

logger = logging.getLogger(__name__)

DEFAULT_LEG_CAP = {"grid": 6, "point": 12}


def _start_state(env: Maze, cell: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    center = env.cell_center(cell)
    if env.kind == "point":
        jitter = 0.5 * env.cell_size - env.margin
        return center + rng.uniform(-jitter, jitter, size=2)
    return center


def expert_action(env: Maze, state: np.ndarray, goal_cell: tuple[int, int], goal: np.ndarray) -> np.ndarray:
    """
    shortest-path action toward goal: the first optimal move (grid) or a straight
    step toward the next cell centre on the BFS path (point).
    """
    cell = env.cell_of(state)
    if env.kind == "grid":
        return env.move_action(env.optimal_moves(cell, goal_cell)[0])
    target = goal if cell == goal_cell else env.cell_center(env.next_cell_toward(cell, goal_cell))
    return np.clip(target - state, -env.action_max, env.action_max)


def _noisy_action(env: Maze, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if env.kind == "grid":
        moves = env.feasible_moves(env.cell_of(state))
        return env.move_action(moves[int(rng.integers(len(moves)))])
    return rng.uniform(-env.action_max, env.action_max, size=env.action_dim)


def _follow(
    env: Maze,
    state: np.ndarray,
    goal_cell: tuple[int, int],
    step_cap: int,
    noise: float,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    goal = env.cell_center(goal_cell)
    states, actions = [], []
    for _ in range(step_cap):
        if env.is_success(state, goal):
            break
        if rng.random() < noise:
            action = _noisy_action(env, state, rng)
        else:
            action = expert_action(env, state, goal_cell, goal)
        state = env.step(state, action)
        actions.append(action)
        states.append(state)
    return states, actions


def _check_common(n_traj: int, noise: float):
    if n_traj < 1:
        raise ConfigurationError(f"n_traj must be >= 1, got {n_traj}")
    if not 0.0 <= noise < 1.0:
        raise ConfigurationError(f"noise must lie in [0, 1), got {noise}")


def generate_expert(env: Maze, n_traj: int, noise: float = 0.0, seed: int = 0) -> OfflineDataset:
    _check_common(n_traj, noise)
    free = env.layout.free_cells
    trajectories = []
    for i in range(n_traj):
        rng = rng_for(seed, "expert", i)
        start_idx, goal_idx = rng.choice(len(free), size=2, replace=False)
        state = _start_state(env, free[start_idx], rng)
        goal_cell = free[goal_idx]
        # start and goal cells differ, so the start is outside the goal ball and T >= 1
        path_states, actions = _follow(env, state, goal_cell, env.episode_cap, noise, rng)
        states = [state, *path_states]
        trajectories.append(Trajectory(np.array(states), np.array(actions), "expert", env.cell_center(goal_cell)))

    logger.info("generated %d expert trajectories (noise %.2f, seed %d)", n_traj, noise, seed)
    metadata = {
        "generator": "expert",
        "env_kind": env.kind,
        "seed": int(seed),
        "n_traj": int(n_traj),
        "noise": float(noise),
        "episode_cap": env.episode_cap,
    }
    return OfflineDataset(tuple(trajectories), env.layout.name, "expert", metadata)


def _leg_radius(env: Maze, leg_cap: int) -> int:
    """How many cells one leg may span so the waypoint is reachable within leg_cap steps."""
    cells_per_step = min(1.0, env.action_max / env.cell_size)
    return max(1, int(np.floor(leg_cap * cells_per_step)))


def generate_play(
    env: Maze,
    n_traj: int,
    n_waypoints: int = 3,
    seed: int = 0,
    leg_cap: int | None = None,
    noise: float = 0.1,
) -> OfflineDataset:
    _check_common(n_traj, noise)
    if n_waypoints < 2:
        raise ConfigurationError(f"n_waypoints must be >= 2, got {n_waypoints}")
    leg_cap = DEFAULT_LEG_CAP.get(env.kind, 6) if leg_cap is None else int(leg_cap)
    if leg_cap < 1:
        raise ConfigurationError(f"leg_cap must be >= 1, got {leg_cap}")

    free = env.layout.free_cells
    radius = _leg_radius(env, leg_cap)
    trajectories = []
    for i in range(n_traj):
        rng = rng_for(seed, "play", i)
        cell = free[int(rng.integers(len(free)))]
        state = _start_state(env, cell, rng)
        states, actions = [state], []
        waypoint = cell
        for _ in range(n_waypoints - 1):
            dist = env.distances_to(waypoint)
            nearby = sorted(c for c, d in dist.items() if 1 <= d <= radius)
            waypoint = nearby[int(rng.integers(len(nearby)))]
            leg_states, leg_actions = _follow(env, states[-1], waypoint, leg_cap, noise, rng)
            states.extend(leg_states)
            actions.extend(leg_actions)
        if not actions:
            # every leg ended at once; record a single stay step so T >= 1
            actions.append(np.zeros(env.action_dim))
            states.append(env.step(states[-1], actions[-1]))
        trajectories.append(Trajectory(np.array(states), np.array(actions), "play", env.cell_center(waypoint)))

    logger.info(
        "generated %d play trajectories (%d waypoints, leg cap %d, seed %d)",
        n_traj, n_waypoints, leg_cap, seed,
    )
    metadata = {
        "generator": "play",
        "env_kind": env.kind,
        "seed": int(seed),
        "n_traj": int(n_traj),
        "n_waypoints": int(n_waypoints),
        "leg_cap": leg_cap,
        "noise": float(noise),
    }
    return OfflineDataset(tuple(trajectories), env.layout.name, "play", metadata)
