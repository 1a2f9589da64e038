"""
deterministic goal-reaching mazes.

states are (x, y) positions in maze coordinates: x grows with the column, y with the
row, and cell (r, c) spans [c*cs, (c+1)*cs) x [r*cs, (r+1)*cs). GridMaze states are
always cell centres; PointMaze states are continuous.
"""

import logging
import threading
from dataclasses import dataclass

import networkx as nx
import numpy as np

from common.errors import ConfigurationError
from envs.layout import MazeLayout, load_layout

logger = logging.getLogger(__name__)

# (dx, dy) per move; index order doubles as the tie-break order
MOVES = np.array([(0, -1), (1, 0), (0, 1), (-1, 0), (0, 0)], dtype=np.float64)
STAY = 4
N_EVAL_GOALS = 4
DEFAULT_EPISODE_CAP = 300


def pairwise_distance(states: np.ndarray, goals: np.ndarray) -> np.ndarray:
    diff = np.asarray(states, dtype=np.float64) - np.asarray(goals, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True, eq=False)
class GoalSpec:
    goal: np.ndarray
    epsilon: float
    cell: tuple[int, int]
    goal_id: int = 0


class Maze:
    """
    shared geometry, reward and shortest-path helpers for both maze kinds.
    """

    kind = "base"

    def __init__(self, layout: MazeLayout, episode_cap: int = DEFAULT_EPISODE_CAP):
        if episode_cap < 1:
            raise ConfigurationError(f"episode_cap must be >= 1, got {episode_cap}")
        self.layout = layout
        self.episode_cap = int(episode_cap)
        self.cell_size = float(layout.cell_size)
        self.epsilon = 0.5 * self.cell_size
        rows, cols = layout.shape
        self._half_extent = np.array([cols, rows], dtype=np.float64) * self.cell_size / 2.0
        self._bfs_cache: dict[tuple[int, int], dict[tuple[int, int], int]] = {}
        self._lock = threading.Lock()
        self._clip_count = 0

    # geometry

    @property
    def action_max(self) -> float:
        raise NotImplementedError

    @property
    def obs_dim(self) -> int:
        return 4

    @property
    def action_dim(self) -> int:
        return 2

    def cell_center(self, cell: tuple[int, int]) -> np.ndarray:
        r, c = cell
        return np.array([(c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size])

    def cell_of(self, state: np.ndarray) -> tuple[int, int]:
        x, y = np.asarray(state, dtype=np.float64)[:2]
        return int(np.floor(y / self.cell_size)), int(np.floor(x / self.cell_size))

    def normalize(self, states: np.ndarray) -> np.ndarray:
        return (np.asarray(states, dtype=np.float64) - self._half_extent) / self._half_extent

    def encode(self, states: np.ndarray, goals: np.ndarray) -> np.ndarray:
        """Network input for (state, goal) rows: both positions centred and scaled to [-1, 1]."""
        s = self.normalize(states)
        g = np.broadcast_to(self.normalize(goals), s.shape)
        return np.concatenate([s, g], axis=-1)

    # reward

    def distance(self, states: np.ndarray, goals: np.ndarray) -> np.ndarray:
        return pairwise_distance(states, goals)

    def reward(self, states: np.ndarray, goals: np.ndarray, epsilon: float | None = None) -> np.ndarray:
        eps = self.epsilon if epsilon is None else epsilon
        return np.where(self.distance(states, goals) < eps, 0.0, -1.0)

    def is_success(self, state: np.ndarray, goal: np.ndarray, epsilon: float | None = None) -> bool:
        return bool(self.reward(state, goal, epsilon) == 0.0)

    def eval_goals(self) -> list[GoalSpec]:
        goals = self.layout.goals
        if len(goals) != N_EVAL_GOALS:
            raise ConfigurationError(
                f"layout '{self.layout.name}' annotates {len(goals)} evaluation goals, "
                f"expected {N_EVAL_GOALS}"
            )
        return [
            GoalSpec(self.cell_center(cell), self.epsilon, cell, goal_id=i)
            for i, cell in enumerate(goals)
        ]

    # shortest paths

    def distances_to(self, cell: tuple[int, int]) -> dict[tuple[int, int], int]:
        """BFS distance from every free cell to `cell` (cached, safe across threads)."""
        with self._lock:
            cached = self._bfs_cache.get(cell)
        if cached is None:
            cached = nx.single_source_shortest_path_length(self.layout.graph, cell)
            with self._lock:
                self._bfs_cache[cell] = cached
        return cached

    def bfs_distance(self, a: tuple[int, int], b: tuple[int, int]) -> int:
        return self.distances_to(b)[a]

    def neighbor(self, cell: tuple[int, int], move: int) -> tuple[int, int]:
        dx, dy = MOVES[move]
        return cell[0] + int(dy), cell[1] + int(dx)

    def feasible_moves(self, cell: tuple[int, int]) -> list[int]:
        return [m for m in range(len(MOVES)) if self.layout.is_free(self.neighbor(cell, m))]

    def optimal_moves(self, cell: tuple[int, int], goal_cell: tuple[int, int]) -> list[int]:
        dist = self.distances_to(goal_cell)
        if cell == goal_cell:
            return [STAY]
        here = dist[cell]
        return [
            m
            for m in range(STAY)
            if self.layout.is_free(self.neighbor(cell, m)) and dist[self.neighbor(cell, m)] == here - 1
        ]

    def next_cell_toward(self, cell: tuple[int, int], goal_cell: tuple[int, int]) -> tuple[int, int]:
        return self.neighbor(cell, self.optimal_moves(cell, goal_cell)[0])

    # dynamics

    @property
    def clip_count(self) -> int:
        with self._lock:
            return self._clip_count

    def clip_action(self, action: np.ndarray) -> tuple[np.ndarray, bool]:
        a = np.asarray(action, dtype=np.float64).reshape(self.action_dim)
        clipped = np.clip(a, -self.action_max, self.action_max)
        was_clipped = not np.array_equal(clipped, a)
        if was_clipped:
            with self._lock:
                self._clip_count += 1
        return clipped, was_clipped

    def move_action(self, move: int) -> np.ndarray:
        return MOVES[move] * self.action_max

    def reset(self, seed) -> np.ndarray:
        raise NotImplementedError

    def step(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_free_space(self, state: np.ndarray) -> bool:
        return self.layout.is_free(self.cell_of(state))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


class GridMaze(Maze):
    """
    discrete maze: every state is a cell centre, actions snap to N/E/S/W/stay and a
    move into a wall leaves the state unchanged.
    """

    kind = "grid"

    @property
    def action_max(self) -> float:
        return self.cell_size

    def snap(self, action: np.ndarray) -> int:
        a = np.asarray(action, dtype=np.float64).reshape(2)
        dists = np.sum((MOVES * self.cell_size - a) ** 2, axis=1)
        return int(np.argmin(dists))

    def reset(self, seed) -> np.ndarray:
        starts = self.layout.start_cells()
        cell = starts[int(_rng(seed).integers(len(starts)))]
        return self.cell_center(cell)

    def step(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        a, _ = self.clip_action(action)
        cell = self.cell_of(state)
        nxt = self.neighbor(cell, self.snap(a))
        return self.cell_center(nxt if self.layout.is_free(nxt) else cell)


class PointMaze(Maze):
    """
    continuous maze: position += clipped action, walls resolved one axis at a time.
    the agent is a square of half-width `margin` that never overlaps a wall cell.
    """

    kind = "point"
    TOL = 1e-9

    def __init__(
        self,
        layout: MazeLayout,
        episode_cap: int = DEFAULT_EPISODE_CAP,
        action_scale: float | None = None,
    ):
        super().__init__(layout, episode_cap)
        self._action_max = 0.5 * self.cell_size if action_scale is None else float(action_scale)
        if not self._action_max > 0:
            raise ConfigurationError(f"action_scale must be positive, got {action_scale}")
        self.margin = 0.1 * self.cell_size

    @property
    def action_max(self) -> float:
        return self._action_max

    def reset(self, seed) -> np.ndarray:
        rng = _rng(seed)
        starts = self.layout.start_cells()
        cell = starts[int(rng.integers(len(starts)))]
        jitter = 0.5 * self.cell_size - self.margin
        return self.cell_center(cell) + rng.uniform(-jitter, jitter, size=2)

    def _index(self, v: float) -> int:
        return int(np.floor(v / self.cell_size))

    def _move_axis(self, pos: np.ndarray, delta: float, axis: int) -> float:
        """New coordinate along `axis` after moving by delta, stopped at the first wall face."""
        walls = self.layout.walls
        cs, m = self.cell_size, self.margin
        other = pos[1 - axis]
        span = range(self._index(other - m), self._index(other + m) + 1)
        target = pos[axis] + delta

        def blocked(line: int) -> bool:
            # axis 0 moves along x, so `line` is a column; axis 1 moves along rows
            cells = [(r, line) for r in span] if axis == 0 else [(line, c) for c in span]
            return any(walls[cell] for cell in cells)

        if delta > 0:
            for line in range(self._index(pos[axis] + m) + 1, self._index(target + m) + 1):
                if blocked(line):
                    return line * cs - m - self.TOL
        elif delta < 0:
            for line in range(self._index(pos[axis] - m) - 1, self._index(target - m) - 1, -1):
                if blocked(line):
                    return (line + 1) * cs + m + self.TOL
        return target

    def step(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        a, _ = self.clip_action(action)
        pos = np.array(state, dtype=np.float64)
        pos[0] = self._move_axis(pos, a[0], 0)
        pos[1] = self._move_axis(pos, a[1], 1)
        return pos

    def in_free_space(self, state: np.ndarray) -> bool:
        x, y = np.asarray(state, dtype=np.float64)[:2]
        if not (np.isfinite(x) and np.isfinite(y)):
            return False
        m = self.margin
        return all(
            self.layout.is_free((r, c))
            for r in range(self._index(y - m), self._index(y + m) + 1)
            for c in range(self._index(x - m), self._index(x + m) + 1)
        )


ENV_KINDS = {"grid": GridMaze, "point": PointMaze}


def make_env(
    kind: str,
    layout: MazeLayout | str,
    episode_cap: int = DEFAULT_EPISODE_CAP,
    action_scale: float | None = None,
) -> Maze:
    if kind not in ENV_KINDS:
        raise ConfigurationError(f"unknown environment kind {kind!r}; expected one of {sorted(ENV_KINDS)}")
    if isinstance(layout, str):
        layout = load_layout(layout)
    if kind == "point":
        return PointMaze(layout, episode_cap, action_scale)
    return GridMaze(layout, episode_cap)
