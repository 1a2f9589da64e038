"""
single-goal evaluation episodes, frozen and with test-time training.

a TTT episode runs cycles of: select data around the current state, fine-tune a
copy of the policy toward the episode goal, roll it out for K steps, then reset
the parameters to the stored pretrained snapshot.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from backbones.networks import CriticPair, value_fn
from backbones.objectives import q_normalizer
from common.errors import NumericError
from common.seeding import rng_for
from datagen.trajectories import OfflineDataset
from datagen.window_index import WindowIndex
from envs.maze import GoalSpec, Maze
from flops.model import FlopModel
from selection.select import SelectionBatch, SelectionDump, select
from tensor_nn.adam import AdamState, adam_step
from tensor_nn.checkpoint import restore, snapshot
from tensor_nn.losses import LossBatch, LossSettings, loss_and_grad
from tensor_nn.mlp import GaussianPolicy
from ttt.config import TTTConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CycleStats:
    cycle: int
    start_step: int
    n_relevant: int
    n_selected: int
    threshold: float
    finetuned: bool


@dataclass(eq=False)
class EpisodeRecord:
    goal_id: int
    goal: np.ndarray
    seed: int
    mode: str
    states: list[np.ndarray] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    cycles: list[CycleStats] = field(default_factory=list)
    success: bool = False
    first_success_step: int = -1
    flops: int = 0
    clip_count: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.actions)

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)

    @property
    def mean_n_selected(self) -> float:
        return float(np.mean([c.n_selected for c in self.cycles])) if self.cycles else 0.0

    def same_trajectory(self, other: "EpisodeRecord") -> bool:
        return (
            len(self.states) == len(other.states)
            and all(np.array_equal(a, b) for a, b in zip(self.states, other.states))
            and all(np.array_equal(a, b) for a, b in zip(self.actions, other.actions))
        )


def episode_flop_model(policy: GaussianPolicy, grad_steps: int, horizon: int = 1) -> FlopModel:
    net = policy.net
    return FlopModel.for_ttt(net.hidden_width, max(net.n_hidden, 1), 1, grad_steps, horizon)


def finetune(
    policy: GaussianPolicy,
    batch: SelectionBatch,
    goal: np.ndarray,
    n_steps: int,
    lr: float,
    *,
    env: Maze,
    rng: np.random.Generator,
    loss_id: str = "bc",
    critic: CriticPair | None = None,
    settings: LossSettings | None = None,
    normalize_q: bool = True,
    minibatch_size: int = 256,
) -> GaussianPolicy:
    """
    n_steps Adam steps (fresh optimizer state) on the selected (state, action) pairs
    with every goal set to `goal`. Critic parameters are read, never updated.
    """
    if n_steps == 0 or lr == 0 or batch.is_empty:
        return policy
    states, actions = batch.training_pairs()
    if len(states) == 0:
        return policy

    obs = env.encode(states, goal)
    settings = settings or LossSettings(policy.log_std)
    q_scale = 1.0
    if loss_id == "ddpg_bc" and critic is not None and normalize_q:
        q_scale = q_normalizer(critic, policy, obs)
    q_params = critic.q if critic is not None else None
    v_params = critic.v if critic is not None else None

    net = policy.net
    opt = AdamState.fresh(net)
    for _ in range(n_steps):
        if len(obs) <= minibatch_size:
            rows = slice(None)
        else:
            rows = rng.integers(len(obs), size=minibatch_size)
        loss_batch = LossBatch(obs[rows], actions[rows], q_scale=q_scale)
        _, grad = loss_and_grad(loss_id, net, loss_batch, settings, q_params, v_params)
        net, opt = adam_step(net, grad, opt, lr)
    return policy.with_net(net)


def _act(env: Maze, policy: GaussianPolicy, state: np.ndarray, goal: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    raw = policy.mean(env.encode(state, goal))
    clipped, was_clipped = env.clip_action(raw)
    return raw, clipped, was_clipped


def _step(env: Maze, record: EpisodeRecord, policy: GaussianPolicy, state: np.ndarray, goal: GoalSpec) -> np.ndarray:
    raw, clipped, was_clipped = _act(env, policy, state, goal.goal)
    state = env.step(state, clipped)
    reward = float(env.reward(state, goal.goal, goal.epsilon))
    record.actions.append(raw)
    record.states.append(state)
    record.rewards.append(reward)
    record.clip_count += int(was_clipped)
    if reward == 0.0 and not record.success:
        record.success = True
        record.first_success_step = record.n_steps
    return state


def run_episode_frozen(env: Maze, policy: GaussianPolicy, goal: GoalSpec, seed: int) -> EpisodeRecord:
    state = env.reset(np.random.default_rng(seed))
    record = EpisodeRecord(goal.goal_id, goal.goal, seed, "frozen", states=[state])
    while record.n_steps < env.episode_cap and not record.success:
        state = _step(env, record, policy, state, goal)
    record.flops = episode_flop_model(policy, 0).charge_episode(record.n_steps)
    return record


def run_episode_ttt(
    env: Maze,
    policy0: GaussianPolicy,
    critic: CriticPair | None,
    ds: OfflineDataset,
    index: WindowIndex,
    cfg: TTTConfig,
    goal: GoalSpec,
    seed: int,
    *,
    loss_id: str = "bc",
    settings: LossSettings | None = None,
    normalize_q: bool = True,
    dump: SelectionDump | None = None,
    on_cycle_end: Callable[[int, GaussianPolicy], None] | None = None,
) -> EpisodeRecord:
    """
    with N == 0 or lr == 0 no selection happens and the episode matches
    run_episode_frozen step for step. `on_cycle_end(cycle, policy)` sees the
    parameters that the next cycle starts from.

    args:
        policy0: pre-trained policy; every cycle restarts from these weights
        critic: pre-trained critic, or None for critic-free modes
        index: window index matching cfg.selection
        seed: episode seed; fixes the reset and every selection draw
        loss_id: fine-tuning objective unless cfg.finetune_loss overrides it
        dump: optional sink for one selection record per cycle

    returns:
        the episode record with states, success flag and per-cycle stats
    """
    loss_id = cfg.finetune_loss or loss_id
    state = env.reset(np.random.default_rng(seed))
    record = EpisodeRecord(goal.goal_id, goal.goal, seed, cfg.selection.mode, states=[state])
    stored = snapshot(policy0.net, "policy", policy0.log_std)
    V = value_fn(critic, env) if critic is not None else None
    tune_rng = rng_for(seed, "finetune")
    select_rng = rng_for(seed, "selection")

    policy = policy0
    n_finetuned = 0
    while record.n_steps < env.episode_cap and not record.success:
        acting = policy
        if cfg.updates_enabled:
            batch = select(ds, index, state, goal.goal, cfg.selection, env, V, select_rng)
            finetuned = False
            if not batch.is_empty:
                try:
                    acting = finetune(
                        policy, batch, goal.goal, cfg.N, cfg.lr,
                        env=env, rng=tune_rng, loss_id=loss_id, critic=critic,
                        settings=settings, normalize_q=normalize_q,
                        minibatch_size=cfg.minibatch_size,
                    )
                    finetuned = True
                    n_finetuned += 1
                except NumericError as e:
                    logger.warning(
                        "fine-tune diverged at step %d (term '%s'); rolling out the stored policy",
                        record.n_steps, e.term,
                    )
                    acting = policy
            record.cycles.append(
                CycleStats(
                    record.n_cycles, record.n_steps, batch.n_relevant, batch.n_selected,
                    batch.threshold, finetuned,
                )
            )
            if dump is not None:
                dump.record(batch, state, goal.goal, seed=seed, goal_id=goal.goal_id, step=record.n_steps)

        for _ in range(cfg.K):
            if record.n_steps >= env.episode_cap or record.success:
                break
            state = _step(env, record, acting, state, goal)

        if cfg.updates_enabled:
            policy = policy0.with_net(restore(stored)) if cfg.reset_each_cycle else acting
            if on_cycle_end is not None:
                on_cycle_end(record.n_cycles - 1, policy)

    record.flops = episode_flop_model(policy0, cfg.N).charge_episode(
        record.n_steps, record.n_cycles, n_finetuned
    )
    return record
