import math
from dataclasses import dataclass

from common.errors import ConfigurationError

MODES = ("full", "critic_free", "relevant_only", "optimal_only", "random")
RELEVANCE = ("distance", "value")


@dataclass(frozen=True)
class SelectionConfig:
    """
    epsilon: relevance radius around the current state
    horizon: window length H in states
    q: percentile of window returns below which windows are dropped
    relevance: 'distance' (d(s, s_1) < epsilon) or 'value' (V(s, s_1) > value_threshold)
    top_fraction: keep only the top q fraction instead of returns >= the q-quantile
    critic_free_extension: critic-free windows run up to this many times the horizon
    """

    epsilon: float = 0.5
    horizon: int = 50
    q: float = 0.2
    mode: str = "full"
    relevance: str = "distance"
    value_threshold: float = -math.inf
    gamma: float = 0.99
    top_fraction: bool = False
    critic_free_extension: int = 2

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"selection epsilon must be positive, got {self.epsilon}")
        if self.horizon < 1:
            raise ConfigurationError(f"selection horizon must be >= 1, got {self.horizon}")
        if not 0.0 <= self.q < 1.0:
            raise ConfigurationError(f"selection q must lie in [0, 1), got {self.q}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown selection mode {self.mode!r}; expected one of {MODES}")
        if self.relevance not in RELEVANCE:
            raise ConfigurationError(f"unknown relevance {self.relevance!r}; expected one of {RELEVANCE}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"selection gamma must lie in (0, 1), got {self.gamma}")
        if self.critic_free_extension < 1:
            raise ConfigurationError("critic_free_extension must be >= 1")

    @property
    def needs_critic(self) -> bool:
        return self.mode in ("full", "optimal_only") or self.relevance == "value"
