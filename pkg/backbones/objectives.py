"""
pretraining objectives built on the tensor_nn loss set: batch construction for each
loss plus scalar loss helpers.
"""

import numpy as np
from scipy.optimize import brentq

from backbones.config import BackboneConfig
from backbones.networks import CriticPair
from backbones.sampling import TransitionBatch
from envs.maze import Maze
from tensor_nn.losses import LossBatch, LossSettings, expectile_weights, loss_and_grad
from tensor_nn.mlp import GaussianPolicy


def policy_batch(env: Maze, batch: TransitionBatch, q_scale: float = 1.0) -> LossBatch:
    return LossBatch(env.encode(batch.states, batch.goals), batch.actions, q_scale=q_scale)


def q_batch(critic: CriticPair, env: Maze, batch: TransitionBatch, gamma: float) -> LossBatch:
    """TD targets r + gamma * mask * V_target(s', g)."""
    next_v = critic.v_values(env.encode(batch.next_states, batch.goals), target=True)
    targets = batch.rewards + gamma * batch.masks * next_v
    return LossBatch(env.encode(batch.states, batch.goals), batch.actions, targets)


def v_batch(critic: CriticPair, env: Maze, batch: TransitionBatch) -> LossBatch:
    obs = env.encode(batch.states, batch.goals)
    return LossBatch(obs, batch.actions, critic.q_values(obs, batch.actions, target=True))


def q_normalizer(critic: CriticPair, policy: GaussianPolicy, obs: np.ndarray) -> float:
    """1 / mean |Q(s, mu(s, g), g)|, so the Q term has unit scale against the BC term."""
    q = critic.q_values(obs, policy.mean(obs))
    return float(1.0 / max(np.mean(np.abs(q)), 1e-6))


def policy_settings(config: BackboneConfig, policy: GaussianPolicy) -> LossSettings:
    return LossSettings(policy.log_std, config.expectile, config.policy_beta, config.awr_weight_clip)


def bc_loss(policy: GaussianPolicy, env: Maze, batch: TransitionBatch) -> float:
    loss, _ = loss_and_grad("bc", policy.net, policy_batch(env, batch), LossSettings(policy.log_std))
    return loss


def iql_q_loss(critic: CriticPair, env: Maze, batch: TransitionBatch, gamma: float) -> float:
    loss, _ = loss_and_grad("iql_q", critic.q, q_batch(critic, env, batch, gamma))
    return loss


def iql_v_loss(critic: CriticPair, env: Maze, batch: TransitionBatch, expectile: float) -> float:
    settings = LossSettings(expectile=expectile)
    loss, _ = loss_and_grad("iql_v", critic.v, v_batch(critic, env, batch), settings)
    return loss


def awr_loss(
    policy: GaussianPolicy,
    critic: CriticPair,
    env: Maze,
    batch: TransitionBatch,
    beta: float,
    weight_clip: float = 100.0,
) -> float:
    settings = LossSettings(policy.log_std, beta=beta, weight_clip=weight_clip)
    loss, _ = loss_and_grad("awr", policy.net, policy_batch(env, batch), settings, critic.q, critic.v)
    return loss


def ddpgbc_loss(
    policy: GaussianPolicy,
    critic: CriticPair,
    env: Maze,
    batch: TransitionBatch,
    beta: float,
    normalize_q: bool = False,
) -> float:
    obs = env.encode(batch.states, batch.goals)
    scale = q_normalizer(critic, policy, obs) if normalize_q else 1.0
    settings = LossSettings(policy.log_std, beta=beta)
    loss, _ = loss_and_grad("ddpg_bc", policy.net, policy_batch(env, batch, scale), settings, critic.q)
    return loss


def expectile_loss(residuals: np.ndarray, expectile: float) -> np.ndarray:
    """Per-sample |alpha - 1{x < 0}| * x^2."""
    x = np.asarray(residuals, dtype=np.float64)
    return expectile_weights(x, expectile) * x * x


def fit_expectile(values: np.ndarray, expectile: float) -> float:
    """The scalar v minimising mean expectile_loss(values - v)."""
    values = np.asarray(values, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    if low == high:
        return low

    def stationarity(v: float) -> float:
        x = values - v
        return float(np.sum(expectile_weights(x, expectile) * x))

    return float(brentq(stationarity, low, high, xtol=1e-12))
