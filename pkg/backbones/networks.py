from dataclasses import dataclass

import numpy as np

from backbones.config import BackboneConfig
from common.seeding import derive_seed
from envs.maze import Maze
from tensor_nn.mlp import GaussianPolicy, ParamStore, forward, init_params


@dataclass(frozen=True, eq=False)
class CriticPair:
    """
    Q(s, a, g) and V(s, g) with target copies. Targets follow
    target <- (1 - tau) * target + tau * online after every critic update.
    """

    q: ParamStore
    v: ParamStore
    q_target: ParamStore
    v_target: ParamStore
    tau: float = 5e-3

    def with_online(self, q: ParamStore, v: ParamStore) -> "CriticPair":
        return CriticPair(q, v, self.q_target, self.v_target, self.tau)

    def soft_update(self) -> "CriticPair":
        tau = self.tau
        q_target = self.q_target.with_weights((1.0 - tau) * self.q_target.weights + tau * self.q.weights)
        v_target = self.v_target.with_weights((1.0 - tau) * self.v_target.weights + tau * self.v.weights)
        return CriticPair(self.q, self.v, q_target, v_target, tau)

    def q_values(self, obs: np.ndarray, actions: np.ndarray, target: bool = False) -> np.ndarray:
        params = self.q_target if target else self.q
        return forward(params, np.concatenate([obs, actions], axis=-1))[..., 0]

    def v_values(self, obs: np.ndarray, target: bool = False) -> np.ndarray:
        params = self.v_target if target else self.v
        return forward(params, obs)[..., 0]


def policy_dims(env: Maze, config: BackboneConfig) -> tuple[int, ...]:
    return (env.obs_dim, *config.hidden_dims, env.action_dim)


def init_policy(seed: int, env: Maze, config: BackboneConfig) -> GaussianPolicy:
    net = init_params(derive_seed(seed, "policy"), policy_dims(env, config))
    return GaussianPolicy(net, np.full(env.action_dim, config.policy_log_std))


def init_critic(seed: int, env: Maze, config: BackboneConfig) -> CriticPair:
    q = init_params(derive_seed(seed, "q"), (env.obs_dim + env.action_dim, *config.hidden_dims, 1))
    v = init_params(derive_seed(seed, "v"), (env.obs_dim, *config.hidden_dims, 1))
    return CriticPair(q, v, q, v, config.effective_tau)


def value_fn(critic: CriticPair, env: Maze):
    """V(states, goals) over raw positions, using the online value network."""

    def V(states: np.ndarray, goals: np.ndarray) -> np.ndarray:
        return critic.v_values(env.encode(states, goals))

    return V
