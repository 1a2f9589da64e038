from dataclasses import dataclass

import numpy as np

from backbones.config import GoalSamplerConfig
from datagen.trajectories import OfflineDataset
from envs.maze import Maze

GOAL_FUTURE, GOAL_RANDOM, GOAL_CURRENT = 0, 1, 2


@dataclass(frozen=True, eq=False)
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    goals: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    masks: np.ndarray
    goal_kinds: np.ndarray

    def __len__(self) -> int:
        return len(self.states)


def sample_batch(
    ds: OfflineDataset,
    env: Maze,
    sampler: GoalSamplerConfig,
    batch_size: int,
    rng: np.random.Generator | int,
) -> TransitionBatch:
    """
    uniform transitions with relabeled goals. The reward is computed on the next
    state, and masks are 0 where that reward is 0 so goal-reaching steps do not bootstrap.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    positions = ds.transition_positions
    idx = positions[rng.integers(len(positions), size=batch_size)]
    kinds = rng.choice(3, size=batch_size, p=[sampler.p_future, sampler.p_random, sampler.p_current])

    future = np.minimum(idx + rng.geometric(1.0 - sampler.future_discount, size=batch_size), ds.flat_end[idx])
    random = rng.integers(len(ds.flat_states), size=batch_size)
    goal_pos = np.select([kinds == GOAL_FUTURE, kinds == GOAL_RANDOM], [future, random], default=idx)

    states = ds.flat_states[idx]
    next_states = ds.flat_states[idx + 1]
    goals = ds.flat_states[goal_pos]
    rewards = env.reward(next_states, goals)
    return TransitionBatch(
        states=states,
        actions=ds.flat_actions[idx],
        goals=goals,
        rewards=rewards,
        next_states=next_states,
        masks=(rewards < 0).astype(np.float64),
        goal_kinds=kinds,
    )
