from backbones.config import BackboneConfig, GoalSamplerConfig
from backbones.networks import CriticPair, init_critic, init_policy, value_fn
from backbones.pretrain import Checkpoint, load_checkpoint, pretrain
from backbones.sampling import TransitionBatch, sample_batch
