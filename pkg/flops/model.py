"""
analytic inference-compute model.

one forward pass of an MLP with n hidden layers of width w costs C = 2 n w^2.
a frozen episode costs L C. A test-time-training episode adds, per cycle, one
unit for data selection and m gradient steps of 6 C each, with f cycles per step:
L f (1 + 6 C m) + L C. All arithmetic is exact (ints and Fractions).
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt

import pandas as pd

from common.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 512
DEFAULT_FREQUENCIES = (Fraction(1, 1000), Fraction(1, 500), Fraction(1, 200))

# reported rounded costs and matched widths for the three default frequencies
REPORTED_FLOPS = {Fraction(1, 1000): 1.6e9, Fraction(1, 500): 2.2e9, Fraction(1, 200): 4e9}
REPORTED_WIDTHS = {Fraction(1, 1000): 624, Fraction(1, 500): 732, Fraction(1, 200): 992}
REPORTED_FROZEN_FLOPS = 1e9


def _exact(x: Fraction) -> int | Fraction:
    return x.numerator if x.denominator == 1 else x


@dataclass(frozen=True)
class FlopModel:
    width: int = DEFAULT_WIDTH
    n_hidden: int = 2
    episode_len: int = 1000
    grad_steps: int = 100
    frequency: Fraction = Fraction(1, 200)
    backward_multiplier: int = 2
    critic_same_size: bool = True

    def __post_init__(self):
        object.__setattr__(self, "frequency", Fraction(self.frequency).limit_denominator(10**9))
        if min(self.width, self.n_hidden, self.episode_len, self.backward_multiplier) < 1:
            raise ConfigurationError("width, n_hidden, episode_len and backward_multiplier must be >= 1")
        if self.grad_steps < 0:
            raise ConfigurationError(f"grad_steps must be >= 0, got {self.grad_steps}")
        if not 0 <= self.frequency <= 1:
            raise ConfigurationError(f"frequency must lie in [0, 1], got {self.frequency}")

    @classmethod
    def for_ttt(cls, width: int, n_hidden: int, episode_len: int, grad_steps: int, horizon: int, **kwargs) -> "FlopModel":
        """Model for a receding-horizon run that re-selects every `horizon` steps."""
        return cls(width, n_hidden, episode_len, grad_steps, Fraction(1, horizon), **kwargs)

    @property
    def forward_cost(self) -> int:
        return 2 * self.n_hidden * self.width**2

    @property
    def update_cost(self) -> int:
        """One gradient step: forward plus backward, for the actor and an equally sized critic."""
        networks = 2 if self.critic_same_size else 1
        return networks * (1 + self.backward_multiplier) * self.forward_cost

    @property
    def cycle_cost(self) -> int:
        return 1 + self.update_cost * self.grad_steps

    @property
    def episode_cost_frozen(self) -> int:
        return self.episode_len * self.forward_cost

    @property
    def episode_cost_ttt(self) -> int | Fraction:
        return _exact(self.episode_len * self.frequency * self.cycle_cost + self.episode_cost_frozen)

    def charge_episode(self, steps: int, n_cycles: int = 0, n_finetuned: int = 0) -> int:
        """
        FLOPs actually spent by one rollout: a forward pass per environment step, one
        unit per selection and grad_steps updates per cycle that fine-tuned.
        """
        return steps * self.forward_cost + n_cycles + n_finetuned * self.update_cost * self.grad_steps


def forward_cost(model: FlopModel) -> int:
    return model.forward_cost


def episode_cost_frozen(model: FlopModel) -> int:
    return model.episode_cost_frozen


def episode_cost_ttt(model: FlopModel) -> int | Fraction:
    if model.grad_steps < 1 or model.frequency <= 0:
        raise ConfigurationError("a TTT cost needs grad_steps >= 1 and frequency > 0")
    return model.episode_cost_ttt


def matched_width(target_flops, n_hidden: int = 2, episode_len: int = 1000) -> int:
    """
    width whose frozen episode cost matches target_flops, i.e. sqrt(target / (2 n L))
    rounded half up, computed exactly.
    """
    target = Fraction(target_flops)
    if target < 0:
        raise ConfigurationError(f"target FLOPs must be non-negative, got {target_flops}")
    x = target / (2 * n_hidden * episode_len)
    # w = floor(sqrt(x) + 1/2) is the largest w with (2w - 1)^2 <= 4x
    root = isqrt(int(4 * x))
    return (root + 1) // 2


def flops_table(
    width: int = DEFAULT_WIDTH,
    n_hidden: int = 2,
    episode_len: int = 1000,
    grad_steps: int = 100,
    frequencies=DEFAULT_FREQUENCIES,
) -> pd.DataFrame:
    """Frozen and TTT episode costs with exact and reported matched widths."""
    base = FlopModel(width, n_hidden, episode_len, grad_steps, Fraction(0))
    rows = [
        {
            "configuration": "frozen",
            "K": None,
            "frequency": 0.0,
            "flops": base.episode_cost_frozen,
            "matched_width": matched_width(base.episode_cost_frozen, n_hidden, episode_len),
            "reported_flops": REPORTED_FROZEN_FLOPS,
            "reported_target_width": matched_width(REPORTED_FROZEN_FLOPS, n_hidden, episode_len),
            "reported_width": width,
        }
    ]
    for f in frequencies:
        f = Fraction(f).limit_denominator(10**9)
        model = FlopModel(width, n_hidden, episode_len, grad_steps, f)
        cost = model.episode_cost_ttt
        reported = REPORTED_FLOPS.get(f)
        rows.append(
            {
                "configuration": "ttt",
                "K": int(1 / f) if f.numerator == 1 else None,
                "frequency": float(f),
                "flops": int(cost) if isinstance(cost, int) else float(cost),
                "matched_width": matched_width(cost, n_hidden, episode_len),
                "reported_flops": reported,
                "reported_target_width": matched_width(reported, n_hidden, episode_len) if reported else None,
                "reported_width": REPORTED_WIDTHS.get(f),
            }
        )
    logger.debug("built FLOP table for width %d over %d frequencies", width, len(frequencies))
    return pd.DataFrame(rows)
