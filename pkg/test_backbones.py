"""
goal relabeling, pretraining objectives and the pretraining loop.
"""

import numpy as np
import pandas as pd
import pytest

from backbones.config import BackboneConfig, GoalSamplerConfig
from backbones.networks import CriticPair, init_critic, init_policy, value_fn
from backbones.objectives import awr_loss, bc_loss, ddpgbc_loss, expectile_loss, fit_expectile, iql_v_loss
from backbones.pretrain import load_checkpoint, pretrain
from backbones.sampling import GOAL_CURRENT, GOAL_FUTURE, GOAL_RANDOM, TransitionBatch, sample_batch
from common.errors import ConfigurationError, MissingArtifactError
from datagen.generate import generate_expert
from tensor_nn.adam import AdamState, adam_step
from tensor_nn.checkpoint import snapshot
from tensor_nn.losses import LossBatch, LossSettings, loss_and_grad
from tensor_nn.mlp import GaussianPolicy, ParamStore, param_count

SMALL = dict(hidden_dims=(16, 16), batch_size=32, pretrain_steps=40, checkpoint_steps=(20, 40), log_every=10)


@pytest.fixture(scope="module")
def tree_expert_ds(tree_env):
    return generate_expert(tree_env, 200, noise=0.0, seed=1)


def _random_batch(env, rng, n=12):
    states = rng.uniform(1.0, 10.0, size=(n, 2))
    goals = rng.uniform(1.0, 10.0, size=(n, 2))
    next_states = states + rng.normal(scale=0.3, size=(n, 2))
    rewards = env.reward(next_states, goals)
    return TransitionBatch(
        states, rng.uniform(-1, 1, size=(n, 2)), goals, rewards, next_states,
        (rewards < 0).astype(float), np.zeros(n, dtype=int),
    )


def test_sampler_config_validation():
    with pytest.raises(ConfigurationError):
        GoalSamplerConfig(0.5, 0.5, 0.5)
    with pytest.raises(ConfigurationError):
        GoalSamplerConfig(1.2, -0.2, 0.0)
    with pytest.raises(ConfigurationError):
        GoalSamplerConfig(future_discount=1.0)


@pytest.mark.parametrize(
    "overrides",
    [{"algo": "sac"}, {"gamma": 1.0}, {"expectile": 0.5}, {"checkpoint_steps": (50_000,)}, {"lr": 0.0}],
)
def test_backbone_config_validation(overrides):
    with pytest.raises(ConfigurationError):
        BackboneConfig(**overrides)


def test_policy_beta_per_algo():
    assert BackboneConfig(algo="gcbc").policy_beta == 0.0
    assert BackboneConfig(algo="gciql_awr", awr_beta=3.0).policy_beta == 3.0
    assert BackboneConfig(algo="gciql_ddpgbc").policy_loss == "ddpg_bc"
    assert not BackboneConfig(algo="gcbc", train_selection_critic=False).trains_critic
    assert BackboneConfig(use_target_networks=False).effective_tau == 1.0


def test_current_goals(grid_env, grid_expert_ds, rng):
    batch = sample_batch(grid_expert_ds, grid_env, GoalSamplerConfig(0.0, 0.0, 1.0), 256, rng)
    np.testing.assert_array_equal(batch.goals, batch.states)
    np.testing.assert_array_equal(batch.rewards, grid_env.reward(batch.next_states, batch.states))
    np.testing.assert_array_equal(batch.masks, batch.rewards < 0)


def test_future_goals_with_tiny_discount_are_next_states(grid_env, grid_expert_ds, rng):
    sampler = GoalSamplerConfig(1.0, 0.0, 0.0, future_discount=1e-9)
    batch = sample_batch(grid_expert_ds, grid_env, sampler, 256, rng)
    np.testing.assert_array_equal(batch.goals, batch.next_states)
    assert np.all(batch.rewards == 0.0)
    assert np.all(batch.masks == 0.0)


def test_future_goals_stay_in_trajectory(grid_env, grid_expert_ds, rng):
    batch = sample_batch(grid_expert_ds, grid_env, GoalSamplerConfig(1.0, 0.0, 0.0, 0.9), 512, rng)
    for s, g in zip(batch.states, batch.goals):
        assert any(
            (traj.states == s).all(axis=1).any() and (traj.states == g).all(axis=1).any()
            for traj in grid_expert_ds.trajectories
        )


def test_goal_mixture_frequencies(grid_env, grid_expert_ds, rng):
    sampler = GoalSamplerConfig()
    n = 100_000
    batch = sample_batch(grid_expert_ds, grid_env, sampler, n, rng)
    for kind, p in ((GOAL_FUTURE, sampler.p_future), (GOAL_RANDOM, sampler.p_random), (GOAL_CURRENT, sampler.p_current)):
        count = np.sum(batch.goal_kinds == kind)
        assert abs(count - n * p) <= 3 * np.sqrt(n * p * (1 - p))


def test_bc_loss_at_mode(grid_env, rng):
    config = BackboneConfig(algo="gcbc", hidden_dims=(8,))
    policy = init_policy(0, grid_env, config)
    zero = policy.with_net(ParamStore(policy.net.layer_dims, np.zeros(policy.net.weights.size)))
    batch = _random_batch(grid_env, rng)
    batch = TransitionBatch(batch.states, np.zeros_like(batch.actions), batch.goals, batch.rewards,
                            batch.next_states, batch.masks, batch.goal_kinds)
    assert bc_loss(zero, grid_env, batch) == pytest.approx(np.log(2 * np.pi))


def test_bc_loss_decreases_under_adam(grid_env, rng):
    config = BackboneConfig(algo="gcbc", hidden_dims=(16, 16))
    policy = init_policy(3, grid_env, config)
    batch = _random_batch(grid_env, rng, n=10)
    loss_batch = LossBatch(grid_env.encode(batch.states, batch.goals), batch.actions)
    settings = LossSettings(policy.log_std)
    opt = AdamState.fresh(policy.net)
    net = policy.net
    losses = []
    for _ in range(100):
        loss, grad = loss_and_grad("bc", net, loss_batch, settings)
        losses.append(loss)
        net, opt = adam_step(net, grad, opt, 1e-3)
    assert np.all(np.diff(losses) < 0)


def test_expectile_examples():
    assert expectile_loss(np.array([-1.0]), 0.9)[0] == pytest.approx(0.1)
    assert fit_expectile(np.array([0.0, -10.0]), 0.99) == pytest.approx(-0.1)
    assert -0.6 < fit_expectile(np.array([0.0, -10.0]), 0.99) < 0.0
    assert fit_expectile(np.array([-3.0, -3.0]), 0.9) == -3.0


def test_symmetric_expectile_halves_mse(grid_env, rng):
    config = BackboneConfig(hidden_dims=(8,))
    critic = init_critic(0, grid_env, config)
    batch = _random_batch(grid_env, rng)
    obs = grid_env.encode(batch.states, batch.goals)
    resid = critic.q_values(obs, batch.actions, target=True) - critic.v_values(obs)
    assert iql_v_loss(critic, grid_env, batch, 0.5) == pytest.approx(0.5 * np.mean(resid**2))


def test_extraction_losses_reduce_to_bc_at_zero_beta(grid_env, rng):
    config = BackboneConfig(hidden_dims=(8, 8))
    policy = init_policy(1, grid_env, config)
    critic = init_critic(1, grid_env, config)
    for _ in range(5):
        batch = _random_batch(grid_env, rng)
        bc = bc_loss(policy, grid_env, batch)
        assert awr_loss(policy, critic, grid_env, batch, beta=0.0) == pytest.approx(bc, rel=1e-12)
        assert ddpgbc_loss(policy, critic, grid_env, batch, beta=0.0) == pytest.approx(bc, rel=1e-12)


def test_constant_advantage_scales_bc_gradient(grid_env, rng):
    policy = init_policy(2, grid_env, BackboneConfig(hidden_dims=(8,)))
    q = ParamStore((6, 1), np.r_[np.zeros(6), 2.0])
    v = ParamStore((4, 1), np.r_[np.zeros(4), 1.0])
    batch = _random_batch(grid_env, rng)
    lb = LossBatch(grid_env.encode(batch.states, batch.goals), batch.actions)
    settings = LossSettings(policy.log_std, beta=3.0)
    _, g_awr = loss_and_grad("awr", policy.net, lb, settings, q, v)
    _, g_bc = loss_and_grad("bc", policy.net, lb, settings)
    np.testing.assert_allclose(g_awr, np.exp(3.0) * g_bc, rtol=1e-10)


def test_soft_update_rule(grid_env):
    config = BackboneConfig(hidden_dims=(4,), tau=0.25)
    critic = init_critic(0, grid_env, config)
    shifted = critic.with_online(critic.q.with_weights(critic.q.weights + 4.0), critic.v)
    updated = shifted.soft_update()
    np.testing.assert_allclose(updated.q_target.weights, critic.q.weights + 1.0)
    np.testing.assert_allclose(updated.v_target.weights, critic.v.weights, rtol=1e-15)
    assert param_count(critic.q.layer_dims) == critic.q.weights.size


def test_pretrain_is_deterministic(grid_env, grid_expert_ds):
    config = BackboneConfig(algo="gciql_awr", **SMALL)
    a = pretrain(grid_expert_ds, grid_env, config, seed=4)
    b = pretrain(grid_expert_ds, grid_env, config, seed=4)
    assert [c.step for c in a] == [20, 40]
    for x, y in zip(a, b):
        assert snapshot(x.policy.net) == snapshot(y.policy.net)
        assert snapshot(x.critic.q, "q") == snapshot(y.critic.q, "q")
    other = pretrain(grid_expert_ds, grid_env, config, seed=5)
    assert snapshot(other[-1].policy.net) != snapshot(a[-1].policy.net)


def test_pretrain_writes_checkpoints_and_log(tmp_path, grid_env, grid_expert_ds):
    config = BackboneConfig(algo="gciql_ddpgbc", **SMALL)
    ckpts = pretrain(grid_expert_ds, grid_env, config, seed=0, out_dir=tmp_path)
    loaded = load_checkpoint(tmp_path / "checkpoints", 0, 40)
    assert loaded.policy.net.equals(ckpts[-1].policy.net)
    assert loaded.critic.v_target.equals(ckpts[-1].critic.v_target)
    assert loaded.critic.tau == config.tau
    log = pd.read_csv(tmp_path / "logs" / "pretrain_gciql_ddpgbc_seed_0.csv")
    assert list(log.columns) == ["step", "loss", "value", "wall_ms"]
    assert set(log["loss"]) == {"iql_q", "iql_v", "ddpg_bc"}
    with pytest.raises(MissingArtifactError):
        load_checkpoint(tmp_path / "checkpoints", 0, 30)


def test_gcbc_without_selection_critic_has_no_critic(grid_env, grid_expert_ds):
    config = BackboneConfig(algo="gcbc", train_selection_critic=False, **SMALL)
    assert all(c.critic is None for c in pretrain(grid_expert_ds, grid_env, config))


def test_gcbc_recovers_shortest_path_actions(tree_env, tree_expert_ds):
    config = BackboneConfig(
        algo="gcbc", hidden_dims=(64, 64), batch_size=128, pretrain_steps=3000,
        checkpoint_steps=(3000,), lr=1e-3, train_selection_critic=False,
    )
    sampler = GoalSamplerConfig(1.0, 0.0, 0.0, 0.9)
    (ckpt,) = pretrain(tree_expert_ds, tree_env, config, sampler, seed=0)
    hits = total = 0
    for traj in tree_expert_ds.trajectories:
        for t in range(traj.length):
            for k in range(t + 1, traj.length + 1):
                s, g = traj.states[t], traj.states[k]
                want = tree_env.optimal_moves(tree_env.cell_of(s), tree_env.cell_of(g))[0]
                got = tree_env.snap(ckpt.policy.mean(tree_env.encode(s, g)))
                hits += got == want
                total += 1
    assert hits / total >= 0.95


@pytest.mark.slow
def test_gcbc_matches_shortest_path_actions_on_held_out_grid_data(grid_env):
    train = generate_expert(grid_env, 2000, noise=0.0, seed=11)
    held_out = generate_expert(grid_env, 200, noise=0.0, seed=12)
    config = BackboneConfig(
        algo="gcbc", hidden_dims=(128, 128), batch_size=256, pretrain_steps=20_000,
        checkpoint_steps=(20_000,), lr=1e-3, train_selection_critic=False,
    )
    (ckpt,) = pretrain(train, grid_env, config, GoalSamplerConfig(1.0, 0.0, 0.0, 0.9), seed=0)
    hits = total = 0
    for traj in held_out.trajectories:
        goal = traj.states[-1]
        for s in traj.states[:-1]:
            optimal = grid_env.optimal_moves(grid_env.cell_of(s), grid_env.cell_of(goal))
            hits += grid_env.snap(ckpt.policy.mean(grid_env.encode(s, goal))) in optimal
            total += 1
    assert total > 0
    assert hits / total >= 0.95


def test_iql_values_stay_non_positive(tree_env, tree_expert_ds, rng):
    config = BackboneConfig(
        algo="gciql_awr", hidden_dims=(32, 32), batch_size=128, pretrain_steps=2000,
        checkpoint_steps=(2000,), lr=1e-3,
    )
    (ckpt,) = pretrain(tree_expert_ds, tree_env, config, seed=0)
    batch = sample_batch(tree_expert_ds, tree_env, GoalSamplerConfig(1.0, 0.0, 0.0, 0.9), 512, rng)
    values = value_fn(ckpt.critic, tree_env)(batch.states, batch.goals)
    assert -1.0 / (1.0 - config.gamma) <= values.mean() <= 0.0
    # returns are never positive, up to fitting slack
    assert values.max() <= 0.1


def test_init_is_seeded(grid_env):
    config = BackboneConfig(hidden_dims=(8,))
    assert init_policy(1, grid_env, config).net.equals(init_policy(1, grid_env, config).net)
    critic = init_critic(1, grid_env, config)
    assert isinstance(critic, CriticPair) and critic.q_target.equals(critic.q)
    assert isinstance(init_policy(1, grid_env, config), GaussianPolicy)
