"""
window scoring against a test goal g*.

hstep:       sum_{j < L-1} gamma^j R(s_j, g*) + gamma^(L-1) V(s_{L-1}, g*)
critic-free: sum_{j < L}   gamma^j R(s_j, g*)
with L the actual window length and R the sparse {-1, 0} reward.
"""

from collections.abc import Callable

import numpy as np

from envs.maze import Maze
from selection.windows import Window, WindowSet

ValueFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _discounted_rewards(
    states: np.ndarray, goal: np.ndarray, env: Maze, gamma: float, n_terms: np.ndarray
) -> np.ndarray:
    """Sum of gamma^j R(states[:, j], goal) over j < n_terms, row by row."""
    acc = np.zeros(len(states))
    for j in range(states.shape[1]):
        r = env.reward(states[:, j], goal)
        acc = acc + np.where(j < n_terms, gamma**j * r, 0.0)
    return acc


def _padded(ws: WindowSet) -> np.ndarray:
    rows, _ = ws.grid
    return ws.dataset.flat_states[rows]


def _last_states(states: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    return states[np.arange(len(states)), lengths - 1]


def _hstep(states, lengths, goal, V, env, gamma):
    acc = _discounted_rewards(states, goal, env, gamma, lengths - 1)
    last = _last_states(states, lengths)
    values = np.asarray(V(last, np.broadcast_to(goal, last.shape)), dtype=np.float64)
    return acc + gamma ** (lengths - 1.0) * values


def hstep_returns(ws: WindowSet, goal: np.ndarray, V: ValueFn, env: Maze, gamma: float) -> np.ndarray:
    if not len(ws):
        return np.zeros(0)
    return _hstep(_padded(ws), ws.lengths, np.asarray(goal, dtype=np.float64), V, env, gamma)


def hstep_return(window: Window, goal: np.ndarray, V: ValueFn, env: Maze, gamma: float) -> float:
    lengths = np.array([window.length])
    return float(_hstep(window.states[None], lengths, np.asarray(goal, dtype=np.float64), V, env, gamma)[0])


def critic_free_returns(ws: WindowSet, goal: np.ndarray, env: Maze, gamma: float) -> np.ndarray:
    if not len(ws):
        return np.zeros(0)
    return _discounted_rewards(_padded(ws), np.asarray(goal, dtype=np.float64), env, gamma, ws.lengths)


def critic_free_return(window: Window, goal: np.ndarray, env: Maze, gamma: float) -> float:
    lengths = np.array([window.length])
    goal = np.asarray(goal, dtype=np.float64)
    return float(_discounted_rewards(window.states[None], goal, env, gamma, lengths)[0])
