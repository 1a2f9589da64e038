"""
test-time data selection: relevance around the current state, then an optimality
filter on window returns toward the test goal.
"""

import json
import logging
import threading
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from common.errors import ConfigurationError
from datagen.trajectories import OfflineDataset
from datagen.window_index import WindowIndex, query_positions
from envs.maze import Maze
from selection.config import SelectionConfig
from selection.returns import ValueFn, critic_free_returns, hstep_returns
from selection.windows import WindowSet, all_windows, windows_at

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SelectionBatch:
    windows: WindowSet
    returns: np.ndarray
    threshold: float
    n_relevant: int
    n_selected: int

    @property
    def is_empty(self) -> bool:
        return self.n_selected == 0

    def training_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """States and recorded actions of every transition inside a selected window."""
        rows = self.windows.pair_positions()
        ds = self.windows.dataset
        return ds.flat_states[rows], ds.flat_actions[rows]


def relevant_windows(
    ds: OfflineDataset,
    index: WindowIndex,
    state: np.ndarray,
    cfg: SelectionConfig,
    value_fn: ValueFn | None = None,
    horizon: int | None = None,
) -> WindowSet:
    horizon = cfg.horizon if horizon is None else horizon
    if cfg.relevance == "value":
        if value_fn is None:
            raise ConfigurationError("value-based relevance needs a critic")
        starts = ds.flat_states
        values = np.asarray(value_fn(np.broadcast_to(state, starts.shape), starts))
        positions = np.flatnonzero(values > cfg.value_threshold)
    else:
        positions = query_positions(index, state, cfg.epsilon)
    return windows_at(ds, positions, horizon)


def optimality_filter(
    windows: WindowSet, returns: np.ndarray, q: float, top_fraction: bool = False
) -> SelectionBatch:
    """
    keep windows whose return is at least C, the linearly interpolated q-quantile
    of the returns (or the (1 - q)-quantile with top_fraction).
    """
    returns = np.asarray(returns, dtype=np.float64)
    if not len(windows):
        return SelectionBatch(windows, returns, float("nan"), 0, 0)
    threshold = float(np.quantile(returns, 1.0 - q if top_fraction else q))
    keep = returns >= threshold
    return SelectionBatch(
        windows.subset(keep), returns[keep], threshold, len(windows), int(keep.sum())
    )


def _require_critic(value_fn: ValueFn | None, mode: str):
    if value_fn is None:
        raise ConfigurationError(f"selection mode '{mode}' needs a critic; use critic_free for GC-BC")


def select(
    ds: OfflineDataset,
    index: WindowIndex,
    state: np.ndarray,
    goal: np.ndarray,
    cfg: SelectionConfig,
    env: Maze,
    value_fn: ValueFn | None = None,
    rng: np.random.Generator | None = None,
) -> SelectionBatch:
    """
    picks the H-step windows to fine-tune on for the agent at `state` chasing `goal`.

    args:
        ds: the offline dataset the windows come from
        index: spatial hash over the dataset states
        state: current agent state
        goal: current goal
        cfg: selection settings; cfg.mode chooses full, critic_free or an ablation
        env: maze used for goal-reward checks and critic input encoding
        value_fn: batched V(s, g); required by full, optimal_only and value relevance
        rng: required by random

    returns:
        the selected windows, possibly empty, with the relevant-set size
    """
    mode = cfg.mode
    if mode == "full":
        _require_critic(value_fn, mode)
        rel = relevant_windows(ds, index, state, cfg, value_fn)
        return optimality_filter(rel, hstep_returns(rel, goal, value_fn, env, cfg.gamma), cfg.q, cfg.top_fraction)

    if mode == "critic_free":
        rel = relevant_windows(ds, index, state, cfg, value_fn, cfg.horizon * cfg.critic_free_extension)
        return optimality_filter(rel, critic_free_returns(rel, goal, env, cfg.gamma), cfg.q, cfg.top_fraction)

    if mode == "relevant_only":
        rel = relevant_windows(ds, index, state, cfg, value_fn)
        returns = (
            hstep_returns(rel, goal, value_fn, env, cfg.gamma)
            if value_fn is not None
            else critic_free_returns(rel, goal, env, cfg.gamma)
        )
        return SelectionBatch(rel, returns, -np.inf, len(rel), len(rel))

    if mode == "optimal_only":
        _require_critic(value_fn, mode)
        every = all_windows(ds, cfg.horizon)
        return optimality_filter(every, hstep_returns(every, goal, value_fn, env, cfg.gamma), cfg.q, cfg.top_fraction)

    # random: uniform windows, as many as the relevance+optimality pipeline would keep
    if rng is None:
        raise ConfigurationError("random selection needs an rng")
    matched_mode = "full" if value_fn is not None else "critic_free"
    matched = select(ds, index, state, goal, _with_mode(cfg, matched_mode), env, value_fn)
    every = all_windows(ds, cfg.horizon)
    count = min(matched.n_selected, len(every))
    picked = np.sort(rng.choice(len(every), size=count, replace=False))
    chosen = every.subset(picked)
    returns = (
        hstep_returns(chosen, goal, value_fn, env, cfg.gamma)
        if value_fn is not None
        else critic_free_returns(chosen, goal, env, cfg.gamma)
    )
    return SelectionBatch(chosen, returns, float("nan"), len(every), count)


def _with_mode(cfg: SelectionConfig, mode: str) -> SelectionConfig:
    return replace(cfg, mode=mode)


def _finite_or_none(x: float):
    return float(x) if np.isfinite(x) else None


class SelectionDump:
    """Appends one JSON line per selection: state, goal, counts, threshold and retained window ids."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, batch: SelectionBatch, state: np.ndarray, goal: np.ndarray, **context) -> None:
        row = {
            **context,
            "state": [float(v) for v in state],
            "goal": [float(v) for v in goal],
            "n_relevant": batch.n_relevant,
            "n_selected": batch.n_selected,
            "threshold": _finite_or_none(batch.threshold),
            "windows": batch.windows.ids(),
        }
        line = json.dumps(row, sort_keys=True)
        with self._lock:
            with self.path.open("a") as f:
                f.write(line + "\n")
