"""
evaluation protocol: one episode per (checkpoint, goal, seed), success averaged per
seed and then reported as mean and standard error across seeds.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import sem

from backbones.config import BackboneConfig, GoalSamplerConfig
from backbones.pretrain import Checkpoint, pretrain
from common.errors import ConfigurationError, MissingArtifactError
from common.seeding import derive_seed
from datagen.trajectories import OfflineDataset
from datagen.window_index import WindowIndex
from envs.maze import GoalSpec, Maze
from flops.model import FlopModel, matched_width
from selection.config import MODES
from selection.select import SelectionDump
from tensor_nn.losses import LossSettings
from ttt import plots
from ttt.config import TTTConfig
from ttt.episode import EpisodeRecord, run_episode_frozen, run_episode_ttt

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "backbone",
    "dataset_regime",
    "mode",
    "checkpoint_step",
    "goal_id",
    "seed",
    "success",
    "first_success_step",
    "flops",
    "n_cycles",
    "mean_n_selected",
]
ABLATION_MODES = ("random", "relevant_only", "optimal_only", "full")


@dataclass(frozen=True, eq=False)
class EvalContext:
    env: Maze
    ds: OfflineDataset
    index: WindowIndex
    backbone: BackboneConfig
    master_seed: int = 0
    dump: SelectionDump | None = None

    @property
    def regime(self) -> str:
        return self.ds.regime


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("GCTTT_WORKERS", os.cpu_count() or 1)))
    except ValueError as e:
        raise ConfigurationError("GCTTT_WORKERS must be an integer") from e


def episode_seed(master: int, seed: int, goal_id: int, step: int) -> int:
    return derive_seed(master, f"episode:{seed}:{goal_id}", step)


def _resolve_mode(mode: str, ttt_cfg: TTTConfig | None) -> tuple[str, TTTConfig | None]:
    if mode == "frozen":
        return mode, None
    if ttt_cfg is None:
        raise ConfigurationError(f"mode '{mode}' needs a TTT configuration")
    if mode == "ttt":
        return ttt_cfg.selection.mode, ttt_cfg
    if mode not in MODES:
        raise ConfigurationError(f"unknown evaluation mode {mode!r}")
    return mode, replace(ttt_cfg, selection=replace(ttt_cfg.selection, mode=mode))


def _run_one(ctx: EvalContext, ckpt: Checkpoint, seed: int, goal: GoalSpec, cfg: TTTConfig | None) -> EpisodeRecord:
    ep_seed = episode_seed(ctx.master_seed, seed, goal.goal_id, ckpt.step)
    if cfg is None:
        return run_episode_frozen(ctx.env, ckpt.policy, goal, ep_seed)
    settings = LossSettings(
        ckpt.policy.log_std, ctx.backbone.expectile, ctx.backbone.policy_beta, ctx.backbone.awr_weight_clip
    )
    return run_episode_ttt(
        ctx.env, ckpt.policy, ckpt.critic, ctx.ds, ctx.index, cfg, goal, ep_seed,
        loss_id=ctx.backbone.policy_loss, settings=settings,
        normalize_q=ctx.backbone.ddpg_normalize_q, dump=ctx.dump,
    )


def evaluate(
    ctx: EvalContext,
    checkpoints: dict[tuple[int, int], Checkpoint],
    mode: str = "frozen",
    ttt_cfg: TTTConfig | None = None,
    goals: list[GoalSpec] | None = None,
) -> pd.DataFrame:
    """
    checkpoints maps (seed, step) to a pretrained checkpoint. mode is 'frozen',
    'ttt' (selection mode from ttt_cfg) or a selection mode name for ablations.
    """
    if not checkpoints:
        raise ConfigurationError("evaluation needs at least one checkpoint")
    label, cfg = _resolve_mode(mode, ttt_cfg)
    goals = goals or ctx.env.eval_goals()
    if cfg is not None and cfg.updates_enabled and cfg.selection.needs_critic:
        missing = [key for key, ckpt in checkpoints.items() if ckpt.critic is None]
        if missing:
            raise ConfigurationError(
                f"selection mode '{cfg.selection.mode}' needs a critic but checkpoints {missing} have none"
            )

    jobs = [
        (seed, step, goal)
        for (seed, step) in sorted(checkpoints)
        for goal in goals
    ]
    logger.info("evaluating %d episodes in mode %s", len(jobs), label)

    def run(job):
        seed, step, goal = job
        return _run_one(ctx, checkpoints[(seed, step)], seed, goal, cfg)

    with ThreadPoolExecutor(max_workers=n_workers()) as pool:
        records = list(pool.map(run, jobs))

    rows = [
        {
            "backbone": ctx.backbone.algo,
            "dataset_regime": ctx.regime,
            "mode": label,
            "checkpoint_step": step,
            "goal_id": goal.goal_id,
            "seed": seed,
            "success": int(rec.success),
            "first_success_step": rec.first_success_step,
            "flops": rec.flops,
            "n_cycles": rec.n_cycles,
            "mean_n_selected": rec.mean_n_selected,
        }
        for (seed, step, goal), rec in zip(jobs, records)
    ]
    df = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    return df.sort_values(["checkpoint_step", "goal_id", "seed"], kind="stable").reset_index(drop=True)


def seed_stats(values: np.ndarray) -> tuple[float, float]:
    """Mean and standard error across seeds (0 with fewer than two seeds)."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(sem(values))


def aggregate(results: pd.DataFrame) -> pd.DataFrame:
    """Success per seed (averaged over goals and checkpoints), then mean and stderr across seeds."""
    rows = []
    for (backbone, regime, mode), group in results.groupby(["backbone", "dataset_regime", "mode"], sort=True):
        per_seed = group.groupby("seed")["success"].mean()
        mean, stderr = seed_stats(per_seed.to_numpy())
        rows.append(
            {
                "backbone": backbone,
                "dataset_regime": regime,
                "mode": mode,
                "success_mean": mean,
                "success_stderr": stderr,
                "n_seeds": len(per_seed),
                "flops_mean": float(group["flops"].mean()),
            }
        )
    return pd.DataFrame(rows)


def selection_retention(dump_path: Path, min_fraction: float = 0.8) -> float:
    """
    share of selections that kept at least min_fraction of their relevant windows.

    args:
        dump_path: JSON lines written by SelectionDump
        min_fraction: retained / relevant ratio a selection must reach

    returns:
        fraction over selections with at least one relevant window (nan if there are none)
    """
    dump_path = Path(dump_path)
    if not dump_path.exists():
        raise MissingArtifactError(f"selection dump {dump_path} does not exist")
    if dump_path.stat().st_size == 0:
        return float("nan")
    rows = pd.read_json(dump_path, lines=True)
    rows = rows[rows["n_relevant"] > 0]
    if rows.empty:
        return float("nan")
    return float((rows["n_selected"] >= min_fraction * rows["n_relevant"]).mean())


def ablate(
    ctx: EvalContext,
    checkpoints: dict[tuple[int, int], Checkpoint],
    ttt_cfg: TTTConfig,
    out_dir: Path,
    modes=ABLATION_MODES,
    goals: list[GoalSpec] | None = None,
) -> pd.DataFrame:
    """One aggregate row per selection mode, with identical K, N, lr; writes CSV and a bar chart."""
    frames = [evaluate(ctx, checkpoints, mode, ttt_cfg, goals) for mode in modes]
    table = aggregate(pd.concat(frames, ignore_index=True))
    table = table.set_index("mode").loc[list(modes)].reset_index()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "ablation.csv", index=False)
    plots.bar_chart(table, "mode", "success_mean", "success_stderr", out_dir / "ablation.svg",
                    title=f"{ctx.backbone.algo} / {ctx.regime}")
    return table


def _analytic_flops(ckpt: Checkpoint, env: Maze, ttt_cfg: TTTConfig, K: int):
    net = ckpt.policy.net
    model = FlopModel.for_ttt(net.hidden_width, net.n_hidden, env.episode_cap, max(ttt_cfg.N, 1), K)
    return model.episode_cost_ttt, model


def frequency_sweep(
    ctx: EvalContext,
    checkpoints: dict[tuple[int, int], Checkpoint],
    ttt_cfg: TTTConfig,
    Ks: list[int],
    out_dir: Path,
    goals: list[GoalSpec] | None = None,
) -> pd.DataFrame:
    """Success against inference FLOPs as the re-selection horizon K shrinks."""
    rows = []
    any_ckpt = next(iter(checkpoints.values()))
    for K in Ks:
        results = evaluate(ctx, checkpoints, "ttt", replace(ttt_cfg, K=K), goals)
        summary = aggregate(results).iloc[0]
        cost, _ = _analytic_flops(any_ckpt, ctx.env, ttt_cfg, K)
        rows.append(
            {
                "K": K,
                "success_mean": summary["success_mean"],
                "success_stderr": summary["success_stderr"],
                "flops_mean": summary["flops_mean"],
                "flops_analytic": float(cost),
            }
        )
    table = pd.DataFrame(rows)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "freq_sweep.csv", index=False)
    plots.line_chart(table, "flops_mean", [("success_mean", "success_stderr", "TTT")],
                     out_dir / "freq_sweep.svg", xlabel="inference FLOPs per episode")
    return table


def hyperparameter_grid(
    ctx: EvalContext,
    checkpoints: dict[tuple[int, int], Checkpoint],
    ttt_cfg: TTTConfig,
    lrs: list[float],
    Ns: list[int],
    Ks: list[int],
    out_dir: Path,
    goals: list[GoalSpec] | None = None,
) -> pd.DataFrame:
    """
    evaluate TTT at every (lr, N, K) combination with q and the rest of ttt_cfg held fixed.

    args:
        ttt_cfg: base configuration; its own (lr, N, K) is flagged in the `configured` column
        lrs, Ns, Ks: values to combine, evaluated in that nesting order

    returns:
        one aggregate row per grid point; `best` marks the highest success per
        backbone and dataset regime (first in grid order on ties)
    """
    if not (lrs and Ns and Ks):
        raise ConfigurationError("hyperparameter grid needs at least one lr, N and K")
    frames = []
    for lr, N, K in product(lrs, Ns, Ks):
        point = replace(ttt_cfg, lr=float(lr), N=int(N), K=int(K))
        logger.info("grid point lr=%g N=%d K=%d", point.lr, point.N, point.K)
        summary = aggregate(evaluate(ctx, checkpoints, "ttt", point, goals))
        summary.insert(0, "K", point.K)
        summary.insert(0, "N", point.N)
        summary.insert(0, "lr", point.lr)
        summary["configured"] = (point.lr, point.N, point.K) == (ttt_cfg.lr, ttt_cfg.N, ttt_cfg.K)
        frames.append(summary)
    table = pd.concat(frames, ignore_index=True)
    best = table.groupby(["backbone", "dataset_regime"], sort=False)["success_mean"].idxmax()
    table["best"] = table.index.isin(best.to_numpy())
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "hyperparameter_grid.csv", index=False)
    return table


def model_scale(
    ctx: EvalContext,
    checkpoints: dict[tuple[int, int], Checkpoint],
    ttt_cfg: TTTConfig,
    Ks: list[int],
    sampler: GoalSamplerConfig,
    out_dir: Path,
    goals: list[GoalSpec] | None = None,
) -> pd.DataFrame:
    """
    TTT at each K against frozen policies pretrained at the width whose frozen
    episode cost matches the TTT cost.
    """
    rows = []
    any_ckpt = next(iter(checkpoints.values()))
    n_hidden = any_ckpt.policy.net.n_hidden
    seeds = sorted({seed for seed, _ in checkpoints})
    for K in Ks:
        cost, _ = _analytic_flops(any_ckpt, ctx.env, ttt_cfg, K)
        width = matched_width(cost, n_hidden, ctx.env.episode_cap)
        ttt = aggregate(evaluate(ctx, checkpoints, "ttt", replace(ttt_cfg, K=K), goals)).iloc[0]

        wide_cfg = replace(ctx.backbone, hidden_dims=(width,) * n_hidden)
        wide = {}
        for seed in seeds:
            logger.info("pretraining width-%d frozen baseline (seed %d) for K=%d", width, seed, K)
            for ckpt in pretrain(ctx.ds, ctx.env, wide_cfg, sampler, seed, master_seed=ctx.master_seed):
                wide[(seed, ckpt.step)] = ckpt
        frozen = aggregate(evaluate(replace(ctx, backbone=wide_cfg), wide, "frozen", goals=goals)).iloc[0]
        rows.append(
            {
                "K": K,
                "flops_analytic": float(cost),
                "matched_width": width,
                "ttt_success_mean": ttt["success_mean"],
                "ttt_success_stderr": ttt["success_stderr"],
                "ttt_flops_mean": ttt["flops_mean"],
                "frozen_success_mean": frozen["success_mean"],
                "frozen_success_stderr": frozen["success_stderr"],
                "frozen_flops_mean": frozen["flops_mean"],
            }
        )
    table = pd.DataFrame(rows).sort_values("flops_analytic").reset_index(drop=True)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "model_scale.csv", index=False)
    plots.line_chart(
        table,
        "flops_analytic",
        [
            ("ttt_success_mean", "ttt_success_stderr", "TTT"),
            ("frozen_success_mean", "frozen_success_stderr", "wider frozen policy"),
        ],
        out_dir / "model_scale.svg",
        xlabel="inference FLOPs per episode",
    )
    return table
