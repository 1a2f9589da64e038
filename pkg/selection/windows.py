"""
sub-trajectory windows. A window starts at any stored state and covers up to H
states of the same trajectory, truncated at the trajectory end.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from datagen.trajectories import OfflineDataset


@dataclass(frozen=True, eq=False)
class Window:
    traj_id: int
    offset: int
    states: np.ndarray
    actions: np.ndarray

    @property
    def length(self) -> int:
        return len(self.states)

    @property
    def start(self) -> np.ndarray:
        return self.states[0]


@dataclass(frozen=True, eq=False)
class WindowSet:
    """windows as parallel arrays of flat start rows and lengths."""

    dataset: OfflineDataset
    positions: np.ndarray
    lengths: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def max_length(self) -> int:
        return int(self.lengths.max()) if len(self) else 0

    @cached_property
    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, max_length) flat rows per window step, and which of them lie inside the window."""
        steps = np.arange(self.max_length)
        valid = steps[None, :] < self.lengths[:, None]
        rows = np.where(valid, self.positions[:, None] + steps[None, :], self.positions[:, None])
        return rows, valid

    def ids(self) -> list[tuple[int, int]]:
        ds = self.dataset
        return [(int(i), int(t)) for i, t in zip(ds.flat_traj[self.positions], ds.flat_t[self.positions])]

    def subset(self, keep: np.ndarray) -> "WindowSet":
        return WindowSet(self.dataset, self.positions[keep], self.lengths[keep])

    def window(self, k: int) -> Window:
        ds = self.dataset
        pos, length = int(self.positions[k]), int(self.lengths[k])
        return Window(
            int(ds.flat_traj[pos]),
            int(ds.flat_t[pos]),
            ds.flat_states[pos : pos + length],
            ds.flat_actions[pos : pos + length - 1],
        )

    def windows(self) -> list[Window]:
        return [self.window(k) for k in range(len(self))]

    def pair_positions(self) -> np.ndarray:
        """Flat rows of every (state, action) pair inside some window, in window order."""
        if not len(self):
            return np.zeros(0, dtype=np.int64)
        rows, valid = self.grid
        has_action = valid & (np.arange(self.max_length)[None, :] < (self.lengths - 1)[:, None])
        return rows[has_action]


def windows_at(ds: OfflineDataset, positions: np.ndarray, horizon: int) -> WindowSet:
    positions = np.asarray(positions, dtype=np.int64)
    lengths = np.minimum(horizon, ds.flat_end[positions] - positions + 1)
    return WindowSet(ds, positions, lengths)


def all_windows(ds: OfflineDataset, horizon: int) -> WindowSet:
    return windows_at(ds, np.arange(len(ds.flat_states)), horizon)
