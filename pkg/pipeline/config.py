"""
run configuration: one YAML file parsed into frozen dataclasses.

top-level keys: seed, out_dir, env, data, backbone, sampler, selection, ttt,
protocol, sweep. The `selection` section may also appear nested under `ttt`.
unknown keys anywhere are rejected.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from backbones.config import BackboneConfig, GoalSamplerConfig
from common.errors import ConfigurationError, MissingArtifactError
from datagen.trajectories import REGIMES
from envs.maze import DEFAULT_EPISODE_CAP, ENV_KINDS
from selection.config import MODES, SelectionConfig
from ttt.config import TTTConfig
from ttt.evaluate import ABLATION_MODES


@dataclass(frozen=True)
class EnvConfig:
    kind: str = "grid"
    layout: str = "grid-medium"
    episode_cap: int = DEFAULT_EPISODE_CAP
    action_scale: float | None = None

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ConfigurationError(f"env.kind must be one of {sorted(ENV_KINDS)}, got {self.kind!r}")
        if self.episode_cap < 1:
            raise ConfigurationError("env.episode_cap must be >= 1")


@dataclass(frozen=True)
class DataConfig:
    regime: str = "expert"
    n_traj: int = 1000
    noise: float = 0.1
    n_waypoints: int = 3
    leg_cap: int | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigurationError(f"data.regime must be one of {REGIMES}, got {self.regime!r}")
        if self.n_traj < 1:
            raise ConfigurationError("data.n_traj must be >= 1")


@dataclass(frozen=True)
class ProtocolConfig:
    seeds: tuple[int, ...] = (0, 1, 2)
    checkpoint_steps: tuple[int, ...] | None = None
    goal_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.checkpoint_steps is not None:
            object.__setattr__(self, "checkpoint_steps", tuple(int(s) for s in self.checkpoint_steps))
        if self.goal_ids is not None:
            object.__setattr__(self, "goal_ids", tuple(int(g) for g in self.goal_ids))
        if not self.seeds:
            raise ConfigurationError("protocol.seeds must not be empty")


@dataclass(frozen=True)
class SweepConfig:
    Ks: tuple[int, ...] = (300, 100, 50)
    ablation_modes: tuple[str, ...] = ABLATION_MODES
    flops_width: int = 512
    flops_episode_len: int = 1000
    flops_grad_steps: int = 100
    grid_lr: tuple[float, ...] = (3e-5, 3e-4)
    grid_N: tuple[int, ...] = (50, 100, 200)
    grid_K: tuple[int, ...] = (100, 200)

    def __post_init__(self):
        object.__setattr__(self, "Ks", tuple(int(k) for k in self.Ks))
        object.__setattr__(self, "ablation_modes", tuple(self.ablation_modes))
        object.__setattr__(self, "grid_lr", tuple(float(lr) for lr in self.grid_lr))
        object.__setattr__(self, "grid_N", tuple(int(n) for n in self.grid_N))
        object.__setattr__(self, "grid_K", tuple(int(k) for k in self.grid_K))
        if any(k < 1 for k in self.Ks):
            raise ConfigurationError(f"sweep.Ks must be >= 1, got {self.Ks}")
        unknown = [m for m in self.ablation_modes if m not in MODES]
        if unknown:
            raise ConfigurationError(f"unknown ablation modes {unknown}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/default"
    env: EnvConfig = field(default_factory=EnvConfig)
    data: DataConfig = field(default_factory=DataConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    sampler: GoalSamplerConfig = field(default_factory=GoalSamplerConfig)
    ttt: TTTConfig = field(default_factory=TTTConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    @property
    def checkpoint_steps(self) -> tuple[int, ...]:
        return self.protocol.checkpoint_steps or self.backbone.checkpoint_steps


SECTIONS = {
    "env": EnvConfig,
    "data": DataConfig,
    "backbone": BackboneConfig,
    "sampler": GoalSamplerConfig,
    "ttt": TTTConfig,
    "protocol": ProtocolConfig,
    "sweep": SweepConfig,
}


def _build(cls, raw, section: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"section '{section}' must be a mapping, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown keys in section '{section}': {unknown}")
    try:
        return cls(**raw)
    except TypeError as e:
        raise ConfigurationError(f"invalid section '{section}': {e}") from e


def config_from_dict(raw: dict | None) -> RunConfig:
    raw = dict(raw or {})
    unknown = sorted(set(raw) - set(SECTIONS) - {"seed", "out_dir", "selection"})
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {unknown}")

    ttt_raw = dict(raw.get("ttt") or {})
    if "selection" in raw:
        if "selection" in ttt_raw:
            raise ConfigurationError("give 'selection' either at top level or under 'ttt', not both")
        ttt_raw["selection"] = raw["selection"]
    if "selection" in ttt_raw:
        ttt_raw["selection"] = _build(SelectionConfig, ttt_raw["selection"], "selection")
    raw["ttt"] = ttt_raw

    sections = {name: _build(cls, raw.get(name), name) for name, cls in SECTIONS.items()}
    try:
        return RunConfig(seed=int(raw.get("seed", 0)), out_dir=str(raw.get("out_dir", "runs/default")), **sections)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid top-level value: {e}") from e


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML config, or a run manifest (JSON with a 'config' key)."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"config file {path} does not exist")
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigurationError(f"could not parse {path}: {e}") from e
    if isinstance(raw, dict) and path.suffix == ".json" and "config" in raw:
        raw = raw["config"]
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg)))


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
