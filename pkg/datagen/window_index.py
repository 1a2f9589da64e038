"""
uniform spatial hash over every dataset state, used to find sub-trajectory starts
within distance epsilon of a query state.
"""

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from common.errors import ConfigurationError
from datagen.trajectories import OfflineDataset
from envs.maze import pairwise_distance

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WindowIndex:
    """
    rows of ds.flat_states grouped by bucket key floor(state / bucket_size).
    bucket b holds rows order[starts[b]:starts[b + 1]]; lookup maps a key to b.
    """

    dataset: OfflineDataset
    bucket_size: float
    keys: np.ndarray
    order: np.ndarray
    starts: np.ndarray
    lookup: dict[tuple[int, ...], int] = field(default_factory=dict)

    @property
    def n_buckets(self) -> int:
        return len(self.keys)

    def bucket_rows(self, bucket: int) -> np.ndarray:
        return self.order[self.starts[bucket] : self.starts[bucket + 1]]


def build_index(ds: OfflineDataset, bucket_size: float = 0.5) -> WindowIndex:
    if not bucket_size > 0:
        raise ConfigurationError(f"bucket_size must be positive, got {bucket_size}")
    cells = np.floor(ds.flat_states / bucket_size).astype(np.int64)
    keys, inverse = np.unique(cells, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(np.bincount(inverse, minlength=len(keys)))])
    lookup = {tuple(int(v) for v in key): b for b, key in enumerate(keys)}
    logger.debug("indexed %d states into %d buckets of %.3f", len(cells), len(keys), bucket_size)
    return WindowIndex(ds, float(bucket_size), keys, order, starts, lookup)


def _neighbour_buckets(index: WindowIndex, low: np.ndarray, high: np.ndarray) -> list[int]:
    ranges = [range(int(lo), int(hi) + 1) for lo, hi in zip(low, high)]
    return [b for key in product(*ranges) if (b := index.lookup.get(key)) is not None]


def query_positions(index: WindowIndex, state: np.ndarray, epsilon: float) -> np.ndarray:
    """Sorted flat rows whose state lies strictly within epsilon of `state`."""
    state = np.asarray(state, dtype=np.float64).reshape(-1)
    states = index.dataset.flat_states
    span = epsilon / index.bucket_size
    if not np.isfinite(span) or (2 * span + 3) ** len(state) > index.n_buckets:
        candidates = np.arange(len(states))
    else:
        # one extra bucket each side absorbs floor rounding at bucket faces
        low = np.floor((state - epsilon) / index.bucket_size) - 1
        high = np.floor((state + epsilon) / index.bucket_size) + 1
        hit = _neighbour_buckets(index, low, high)
        if not hit:
            return np.zeros(0, dtype=np.int64)
        candidates = np.concatenate([index.bucket_rows(b) for b in hit])
    close = pairwise_distance(states[candidates], state) < epsilon
    return np.sort(candidates[close])


def query_ball(index: WindowIndex, state: np.ndarray, epsilon: float) -> list[tuple[int, int]]:
    rows = query_positions(index, state, epsilon)
    ds = index.dataset
    return [(int(i), int(t)) for i, t in zip(ds.flat_traj[rows], ds.flat_t[rows])]
