"""
trajectory and offline dataset containers.

an OfflineDataset also keeps flat views over all trajectories; flat row k holds a
state and the action taken from it (zero for the final state of a trajectory).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from common.errors import ConfigurationError, ShapeError
from envs.maze import Maze

SOURCE_TAGS = ("expert", "play")
REGIMES = ("expert", "play")


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    source_tag: str
    goal: np.ndarray | None = None

    def __post_init__(self):
        states = np.array(self.states, dtype=np.float64)
        actions = np.array(self.actions, dtype=np.float64)
        if states.ndim != 2 or actions.ndim != 2 or len(actions) < 1:
            raise ShapeError("trajectory needs (T+1, d) states and (T, a) actions with T >= 1")
        if len(states) != len(actions) + 1:
            raise ShapeError(f"{len(states)} states for {len(actions)} actions")
        if self.source_tag not in SOURCE_TAGS:
            raise ConfigurationError(f"unknown source tag {self.source_tag!r}")
        states.setflags(write=False)
        actions.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        if self.goal is not None:
            goal = np.array(self.goal, dtype=np.float64).reshape(-1)
            goal.setflags(write=False)
            object.__setattr__(self, "goal", goal)

    @property
    def length(self) -> int:
        return len(self.actions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        same_goal = (self.goal is None and other.goal is None) or (
            self.goal is not None
            and other.goal is not None
            and np.array_equal(self.goal, other.goal)
        )
        return (
            self.source_tag == other.source_tag
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.actions, other.actions)
            and same_goal
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class OfflineDataset:
    trajectories: tuple[Trajectory, ...]
    layout_name: str
    regime: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        trajectories = tuple(self.trajectories)
        if not trajectories:
            raise ConfigurationError("offline dataset must contain at least one trajectory")
        if self.regime not in REGIMES:
            raise ConfigurationError(f"unknown dataset regime {self.regime!r}")
        object.__setattr__(self, "trajectories", trajectories)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OfflineDataset):
            return NotImplemented
        return (
            self.layout_name == other.layout_name
            and self.regime == other.regime
            and self.metadata == other.metadata
            and self.trajectories == other.trajectories
        )

    __hash__ = None

    @property
    def n_transitions(self) -> int:
        return sum(t.length for t in self.trajectories)

    @cached_property
    def traj_offsets(self) -> np.ndarray:
        """Flat start row of every trajectory plus a final end marker."""
        lengths = np.array([len(t.states) for t in self.trajectories])
        return np.concatenate([[0], np.cumsum(lengths)])

    @cached_property
    def flat_states(self) -> np.ndarray:
        return np.concatenate([t.states for t in self.trajectories])

    @cached_property
    def flat_actions(self) -> np.ndarray:
        dim = self.trajectories[0].actions.shape[1]
        return np.concatenate(
            [np.vstack([t.actions, np.zeros((1, dim))]) for t in self.trajectories]
        )

    @cached_property
    def flat_traj(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), np.diff(self.traj_offsets))

    @cached_property
    def flat_t(self) -> np.ndarray:
        return np.arange(len(self.flat_states)) - self.traj_offsets[self.flat_traj]

    @cached_property
    def flat_end(self) -> np.ndarray:
        """Flat row of the final state of each row's trajectory."""
        return self.traj_offsets[self.flat_traj + 1] - 1

    @cached_property
    def transition_positions(self) -> np.ndarray:
        """Flat rows that have an outgoing action."""
        return np.flatnonzero(np.arange(len(self.flat_states)) < self.flat_end)

    def position(self, traj_id: int, offset: int) -> int:
        return int(self.traj_offsets[traj_id] + offset)

    def replay_check(self, env: Maze) -> bool:
        """True when re-simulating every recorded action reproduces the recorded states exactly."""
        for traj in self.trajectories:
            state = traj.states[0]
            for action, expected in zip(traj.actions, traj.states[1:]):
                state = env.step(state, action)
                if not np.array_equal(state, expected):
                    return False
        return True
