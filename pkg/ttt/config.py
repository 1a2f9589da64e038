from dataclasses import dataclass, field

from common.errors import ConfigurationError
from selection.config import SelectionConfig
from tensor_nn.losses import LOSS_IDS

POLICY_LOSSES = ("bc", "awr", "ddpg_bc")


@dataclass(frozen=True)
class TTTConfig:
    """
    K: environment steps between re-selections
    N: gradient steps per fine-tune cycle
    lr: fine-tune learning rate (0 disables updates)
    finetune_loss: policy loss used at test time, None means the backbone's own
    """

    K: int = 50
    N: int = 100
    lr: float = 3e-4
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    finetune_loss: str | None = None
    reset_each_cycle: bool = True
    minibatch_size: int = 256

    def __post_init__(self):
        if isinstance(self.selection, dict):
            object.__setattr__(self, "selection", SelectionConfig(**self.selection))
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if self.N < 0:
            raise ConfigurationError(f"N must be >= 0, got {self.N}")
        if self.lr < 0:
            raise ConfigurationError(f"fine-tune lr must be >= 0, got {self.lr}")
        if self.finetune_loss is not None and self.finetune_loss not in POLICY_LOSSES:
            raise ConfigurationError(
                f"finetune_loss must be one of {POLICY_LOSSES} (of {LOSS_IDS}), got {self.finetune_loss!r}"
            )
        if self.minibatch_size < 1:
            raise ConfigurationError(f"minibatch_size must be >= 1, got {self.minibatch_size}")

    @property
    def updates_enabled(self) -> bool:
        return self.N > 0 and self.lr > 0
