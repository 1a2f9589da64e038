"""
gcttt command line: gen-data, pretrain, eval, ablate, freq-sweep, grid, flops, scale.

every command reads one YAML config (--config), writes under its out_dir and
leaves a manifest_<command>.json next to its outputs.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from backbones.pretrain import Checkpoint, load_checkpoint, pretrain
from common.errors import ConfigurationError, GCTTTError
from common.seeding import derive_seed
from datagen.dataset_io import load_dataset, save_dataset
from datagen.generate import generate_expert, generate_play
from datagen.window_index import build_index
from envs.maze import GoalSpec, Maze, make_env
from flops.model import flops_table
from pipeline.config import RunConfig, load_config
from pipeline.manifest import REPLAYED_ARGUMENTS, manifest_arguments, write_manifest
from selection.config import MODES
from selection.select import SelectionDump
from ttt.evaluate import (
    EvalContext,
    ablate,
    aggregate,
    evaluate,
    frequency_sweep,
    hyperparameter_grid,
    model_scale,
    selection_retention,
)

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.gcttds"
EVAL_MODES = ("frozen", "ttt", *MODES)


def build_env(cfg: RunConfig) -> Maze:
    return make_env(cfg.env.kind, cfg.env.layout, cfg.env.episode_cap, cfg.env.action_scale)


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.out_dir)


def _goals(cfg: RunConfig, env: Maze) -> list[GoalSpec]:
    goals = env.eval_goals()
    if cfg.protocol.goal_ids is None:
        return goals
    unknown = [g for g in cfg.protocol.goal_ids if g not in range(len(goals))]
    if unknown:
        raise ConfigurationError(f"protocol.goal_ids {unknown} do not exist")
    return [goals[g] for g in cfg.protocol.goal_ids]


def _load_checkpoints(cfg: RunConfig) -> dict[tuple[int, int], Checkpoint]:
    root = _out(cfg) / "checkpoints"
    return {
        (seed, step): load_checkpoint(root, seed, step)
        for seed in cfg.protocol.seeds
        for step in cfg.checkpoint_steps
    }


def _context(cfg: RunConfig, env: Maze, dump_name: str | None) -> EvalContext:
    ds = load_dataset(_out(cfg) / DATASET_FILE)
    index = build_index(ds, cfg.ttt.selection.epsilon)
    dump = None
    if dump_name is not None:
        path = _out(cfg) / "logs" / f"selections_{dump_name}.jsonl"
        path.unlink(missing_ok=True)
        dump = SelectionDump(path)
    return EvalContext(env, ds, index, cfg.backbone, cfg.seed, dump)


def cmd_gen_data(cfg: RunConfig, args) -> Path:
    env = build_env(cfg)
    seed = derive_seed(cfg.seed, "data")
    if cfg.data.regime == "expert":
        ds = generate_expert(env, cfg.data.n_traj, cfg.data.noise, seed)
    else:
        ds = generate_play(env, cfg.data.n_traj, cfg.data.n_waypoints, seed, cfg.data.leg_cap, cfg.data.noise)
    path = _out(cfg) / DATASET_FILE
    save_dataset(ds, path)
    print(f"{ds.regime} dataset on {ds.layout_name}: {len(ds)} trajectories, {ds.n_transitions} transitions -> {path}")
    return path


def cmd_pretrain(cfg: RunConfig, args) -> Path:
    env = build_env(cfg)
    ds = load_dataset(_out(cfg) / DATASET_FILE)
    for seed in cfg.protocol.seeds:
        pretrain(ds, env, cfg.backbone, cfg.sampler, seed, _out(cfg), master_seed=cfg.seed)
    print(f"pretrained {cfg.backbone.algo} for seeds {list(cfg.protocol.seeds)} at steps {list(cfg.backbone.checkpoint_steps)}")
    return _out(cfg) / "checkpoints"


def cmd_eval(cfg: RunConfig, args) -> Path:
    env = build_env(cfg)
    ctx = _context(cfg, env, args.mode if args.dump_selections else None)
    results = evaluate(ctx, _load_checkpoints(cfg), args.mode, cfg.ttt, _goals(cfg, env))
    out = _out(cfg) / "results"
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"eval_{args.mode}.csv"
    results.to_csv(path, index=False)
    summary = aggregate(results)
    summary.to_csv(out / f"aggregate_{args.mode}.csv", index=False)
    print(summary.to_string(index=False))
    if args.dump_selections and args.mode != "frozen":
        retention = selection_retention(_out(cfg) / "logs" / f"selections_{args.mode}.jsonl")
        print(f"selections keeping >= 80% of relevant windows: {retention:.3f}")
    return path


def cmd_ablate(cfg: RunConfig, args) -> Path:
    env = build_env(cfg)
    ctx = _context(cfg, env, "ablate" if args.dump_selections else None)
    table = ablate(ctx, _load_checkpoints(cfg), cfg.ttt, _out(cfg) / "results", cfg.sweep.ablation_modes, _goals(cfg, env))
    print(table.to_string(index=False))
    return _out(cfg) / "results" / "ablation.csv"


def cmd_freq_sweep(cfg: RunConfig, args) -> Path:
    env = build_env(cfg)
    ctx = _context(cfg, env, "freq_sweep" if args.dump_selections else None)
    Ks = args.K or list(cfg.sweep.Ks)
    table = frequency_sweep(ctx, _load_checkpoints(cfg), cfg.ttt, Ks, _out(cfg) / "results", _goals(cfg, env))
    print(table.to_string(index=False))
    return _out(cfg) / "results" / "freq_sweep.csv"


def cmd_grid(cfg: RunConfig, args) -> Path:
    env = build_env(cfg)
    ctx = _context(cfg, env, None)
    sweep = cfg.sweep
    table = hyperparameter_grid(
        ctx, _load_checkpoints(cfg), cfg.ttt, list(sweep.grid_lr), list(sweep.grid_N), list(sweep.grid_K),
        _out(cfg) / "results", _goals(cfg, env),
    )
    print(table.to_string(index=False))
    return _out(cfg) / "results" / "hyperparameter_grid.csv"


def cmd_flops(cfg: RunConfig, args) -> Path:
    sweep = cfg.sweep
    table = flops_table(sweep.flops_width, 2, sweep.flops_episode_len, sweep.flops_grad_steps)
    out = _out(cfg) / "results"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "flops.csv"
    table.to_csv(path, index=False)
    print(table.to_string(index=False))
    return path


def cmd_scale(cfg: RunConfig, args) -> Path:
    env = build_env(cfg)
    ctx = _context(cfg, env, None)
    Ks = args.K or list(cfg.sweep.Ks)
    table = model_scale(ctx, _load_checkpoints(cfg), cfg.ttt, Ks, cfg.sampler, _out(cfg) / "results", _goals(cfg, env))
    print(table.to_string(index=False))
    return _out(cfg) / "results" / "model_scale.csv"


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain": cmd_pretrain,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "freq-sweep": cmd_freq_sweep,
    "grid": cmd_grid,
    "flops": cmd_flops,
    "scale": cmd_scale,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcttt", description="goal-conditioned test-time training on desk-scale mazes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="YAML config or a previous run manifest")
        p.add_argument("--out", type=Path, default=None, help="override out_dir from the config")
        if name == "eval":
            p.add_argument("--mode", choices=EVAL_MODES, default=None, help="defaults to the manifest's mode, else frozen")
        if name in ("freq-sweep", "scale"):
            p.add_argument("--K", type=int, nargs="+", default=None, help="re-selection horizons")
        if name in ("eval", "ablate", "freq-sweep"):
            p.add_argument("--dump-selections", action="store_true", default=None, help="write every selection to logs/ as JSON lines")
    return parser


def _resolve_arguments(args) -> None:
    """fill arguments left unset from a replayed manifest, then apply the defaults."""
    command = args.command.replace("-", "_")
    recorded = manifest_arguments(args.config, command)
    if hasattr(args, "mode") and args.mode is None:
        args.mode = recorded.get("mode", "frozen")
    if hasattr(args, "K") and args.K is None:
        args.K = recorded.get("K")
    if hasattr(args, "dump_selections") and args.dump_selections is None:
        args.dump_selections = bool(recorded.get("dump_selections", False))


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        _resolve_arguments(args)
        if args.out is not None:
            cfg = replace(cfg, out_dir=str(args.out))
        output = COMMANDS[args.command](cfg, args)
        extra = {"output": str(output)}
        for key in REPLAYED_ARGUMENTS:
            if getattr(args, key, None):
                extra[key] = getattr(args, key)
        write_manifest(_out(cfg), args.command.replace("-", "_"), cfg, extra)
    except GCTTTError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except Exception:
        logger.exception("unexpected failure in '%s'", args.command)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
