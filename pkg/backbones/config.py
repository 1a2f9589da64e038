from dataclasses import dataclass

from common.errors import ConfigurationError

ALGOS = ("gcbc", "gciql_awr", "gciql_ddpgbc")
POLICY_LOSS = {"gcbc": "bc", "gciql_awr": "awr", "gciql_ddpgbc": "ddpg_bc"}


@dataclass(frozen=True)
class GoalSamplerConfig:
    """goal relabeling mixture: future state of the same trajectory, random dataset state, or the current state."""

    p_future: float = 0.7
    p_random: float = 0.25
    p_current: float = 0.05
    future_discount: float = 0.99

    def __post_init__(self):
        probs = (self.p_future, self.p_random, self.p_current)
        if any(p < 0 for p in probs):
            raise ConfigurationError(f"goal sampler probabilities must be non-negative, got {probs}")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigurationError(f"goal sampler probabilities must sum to 1, got {sum(probs)}")
        if not 0.0 < self.future_discount < 1.0:
            raise ConfigurationError(f"future_discount must lie in (0, 1), got {self.future_discount}")


@dataclass(frozen=True)
class BackboneConfig:
    algo: str = "gciql_awr"
    gamma: float = 0.99
    expectile: float = 0.9
    awr_beta: float = 3.0
    ddpg_beta: float = 1.0
    awr_weight_clip: float = 100.0
    batch_size: int = 256
    pretrain_steps: int = 40_000
    checkpoint_steps: tuple[int, ...] = (30_000, 35_000, 40_000)
    hidden_dims: tuple[int, ...] = (64, 64)
    lr: float = 3e-4
    tau: float = 5e-3
    use_target_networks: bool = True
    policy_log_std: float = 0.0
    ddpg_normalize_q: bool = True
    train_selection_critic: bool = True
    log_every: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "checkpoint_steps", tuple(int(s) for s in self.checkpoint_steps))
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.algo not in ALGOS:
            raise ConfigurationError(f"unknown backbone {self.algo!r}; expected one of {ALGOS}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.5 < self.expectile < 1.0:
            raise ConfigurationError(f"expectile must lie in (0.5, 1), got {self.expectile}")
        if self.awr_beta < 0 or self.ddpg_beta < 0:
            raise ConfigurationError("awr_beta and ddpg_beta must be non-negative")
        if self.awr_weight_clip <= 0:
            raise ConfigurationError("awr_weight_clip must be positive")
        if self.batch_size < 1 or self.pretrain_steps < 1 or self.log_every < 1:
            raise ConfigurationError("batch_size, pretrain_steps and log_every must be >= 1")
        if not self.checkpoint_steps or any(
            s < 1 or s > self.pretrain_steps for s in self.checkpoint_steps
        ):
            raise ConfigurationError(
                f"checkpoint_steps {self.checkpoint_steps} must lie in [1, {self.pretrain_steps}]"
            )
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError(f"hidden_dims must be positive, got {self.hidden_dims}")
        if self.lr <= 0:
            raise ConfigurationError(f"pretraining lr must be positive, got {self.lr}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigurationError(f"tau must lie in (0, 1], got {self.tau}")

    @property
    def trains_critic(self) -> bool:
        return self.algo != "gcbc" or self.train_selection_critic

    @property
    def policy_loss(self) -> str:
        return POLICY_LOSS[self.algo]

    @property
    def policy_beta(self) -> float:
        return {"gcbc": 0.0, "gciql_awr": self.awr_beta, "gciql_ddpgbc": self.ddpg_beta}[self.algo]

    @property
    def effective_tau(self) -> float:
        return self.tau if self.use_target_networks else 1.0
