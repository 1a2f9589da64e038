from tensor_nn.adam import AdamState, adam_step
from tensor_nn.checkpoint import load_params, restore, save_params, snapshot
from tensor_nn.losses import LOSS_IDS, LossBatch, LossSettings, loss_and_grad
from tensor_nn.mlp import GaussianPolicy, ParamStore, forward, init_params, param_count
