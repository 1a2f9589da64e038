"""
offline pretraining loop for GC-BC and GC-IQL (AWR / DDPG+BC extraction).

each IQL step updates Q, then V, then soft-updates the targets, then takes one
policy-extraction step. GC-BC only takes the BC step, plus the critic steps when
a selection critic is requested.
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from backbones.config import BackboneConfig, GoalSamplerConfig
from backbones.networks import CriticPair, init_critic, init_policy
from backbones.objectives import policy_batch, policy_settings, q_batch, q_normalizer, v_batch
from backbones.sampling import sample_batch
from common.errors import MissingArtifactError, NumericError
from common.seeding import derive_seed, rng_for
from datagen.trajectories import OfflineDataset
from envs.maze import Maze
from tensor_nn.adam import AdamState, adam_step
from tensor_nn.checkpoint import load_params, save_params
from tensor_nn.losses import LossSettings, loss_and_grad
from tensor_nn.mlp import GaussianPolicy

logger = logging.getLogger(__name__)

CRITIC_ROLES = ("q", "v", "q_target", "v_target")


@dataclass(frozen=True, eq=False)
class Checkpoint:
    step: int
    policy: GaussianPolicy
    critic: CriticPair | None = None


def checkpoint_dir(root: Path, seed: int, step: int) -> Path:
    return Path(root) / f"seed_{seed}" / f"step_{step}"


def save_checkpoint(root: Path, seed: int, ckpt: Checkpoint) -> Path:
    out = checkpoint_dir(root, seed, ckpt.step)
    save_params(out / "policy.gctt", ckpt.policy.net, "policy", ckpt.policy.log_std)
    if ckpt.critic is not None:
        for role in CRITIC_ROLES:
            save_params(out / f"{role}.gctt", getattr(ckpt.critic, role), role, np.array([ckpt.critic.tau]))
    return out


def load_checkpoint(root: Path, seed: int, step: int) -> Checkpoint:
    src = checkpoint_dir(root, seed, step)
    if not (src / "policy.gctt").exists():
        raise MissingArtifactError(f"no checkpoint for seed {seed} at step {step} under {root}; run pretrain first")
    net, _, log_std = load_params(src / "policy.gctt")
    critic = None
    if all((src / f"{role}.gctt").exists() for role in CRITIC_ROLES):
        loaded = {role: load_params(src / f"{role}.gctt") for role in CRITIC_ROLES}
        tau = float(loaded["q"][2][0]) if loaded["q"][2].size else 5e-3
        critic = CriticPair(*(loaded[role][0] for role in CRITIC_ROLES), tau=tau)
    return Checkpoint(step, GaussianPolicy(net, log_std), critic)


def _critic_step(critic, q_opt, v_opt, env, batch, config):
    q_loss, q_grad = loss_and_grad("iql_q", critic.q, q_batch(critic, env, batch, config.gamma))
    q, q_opt = adam_step(critic.q, q_grad, q_opt, config.lr)
    critic = critic.with_online(q, critic.v)

    settings = LossSettings(expectile=config.expectile)
    v_loss, v_grad = loss_and_grad("iql_v", critic.v, v_batch(critic, env, batch), settings)
    v, v_opt = adam_step(critic.v, v_grad, v_opt, config.lr)
    critic = critic.with_online(critic.q, v).soft_update()
    return critic, q_opt, v_opt, q_loss, v_loss


def _policy_step(policy, critic, opt, env, batch, config):
    loss_id = config.policy_loss
    q_scale = 1.0
    if loss_id == "ddpg_bc" and config.ddpg_normalize_q:
        q_scale = q_normalizer(critic, policy, env.encode(batch.states, batch.goals))
    loss, grad = loss_and_grad(
        loss_id,
        policy.net,
        policy_batch(env, batch, q_scale),
        policy_settings(config, policy),
        q_params=critic.q if critic is not None else None,
        v_params=critic.v if critic is not None else None,
    )
    net, opt = adam_step(policy.net, grad, opt, config.lr)
    return policy.with_net(net), opt, loss


def pretrain(
    ds: OfflineDataset,
    env: Maze,
    config: BackboneConfig,
    sampler: GoalSamplerConfig | None = None,
    seed: int = 0,
    out_dir: Path | None = None,
    master_seed: int = 0,
) -> list[Checkpoint]:
    """
    train from scratch and return checkpoints at config.checkpoint_steps.

    with out_dir set, checkpoints go to out_dir/checkpoints/seed_<s>/step_<k>/ and the
    loss log to out_dir/logs/pretrain_<algo>_seed_<s>.csv.
    """
    sampler = sampler or GoalSamplerConfig()
    run_seed = derive_seed(master_seed, "pretrain", seed)
    rng = rng_for(run_seed, "batches")
    policy = init_policy(run_seed, env, config)
    critic = init_critic(run_seed, env, config) if config.trains_critic else None
    policy_opt = AdamState.fresh(policy.net)
    q_opt = AdamState.fresh(critic.q) if critic else None
    v_opt = AdamState.fresh(critic.v) if critic else None

    wanted = set(config.checkpoint_steps)
    checkpoints: list[Checkpoint] = []
    log_rows = []
    started = time.perf_counter()
    logger.info(
        "pretraining %s for %d steps (seed %d, batch %d, widths %s)",
        config.algo, config.pretrain_steps, seed, config.batch_size, config.hidden_dims,
    )

    for step in range(1, config.pretrain_steps + 1):
        batch = sample_batch(ds, env, sampler, config.batch_size, rng)
        try:
            losses = {}
            if critic is not None:
                critic, q_opt, v_opt, losses["iql_q"], losses["iql_v"] = _critic_step(
                    critic, q_opt, v_opt, env, batch, config
                )
            policy, policy_opt, losses[config.policy_loss] = _policy_step(
                policy, critic, policy_opt, env, batch, config
            )
        except NumericError as e:
            logger.error("pretraining diverged at step %d in term '%s'", step, e.term)
            raise

        if step % config.log_every == 0 or step == 1:
            wall_ms = (time.perf_counter() - started) * 1000.0
            for name, value in losses.items():
                log_rows.append({"step": step, "loss": name, "value": value, "wall_ms": wall_ms})
            logger.info(
                "step %d: %s",
                step, ", ".join(f"{name}={value:.4f}" for name, value in losses.items()),
            )

        if step in wanted:
            ckpt = Checkpoint(step, policy, critic)
            checkpoints.append(ckpt)
            if out_dir is not None:
                path = save_checkpoint(Path(out_dir) / "checkpoints", seed, ckpt)
                logger.info("saved checkpoint at step %d to %s", step, path)

    if out_dir is not None:
        log_path = Path(out_dir) / "logs" / f"pretrain_{config.algo}_seed_{seed}.csv"
        log_path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(log_rows, columns=["step", "loss", "value", "wall_ms"]).to_csv(log_path, index=False)
    return checkpoints
