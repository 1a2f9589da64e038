import json
import logging
import subprocess
from importlib import metadata
from pathlib import Path

from pipeline.config import RunConfig, config_hash, config_to_dict

logger = logging.getLogger(__name__)


def build_id() -> str:
    """`git describe` of the source tree, or the installed package version outside a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        if out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return f"gcttt-{metadata.version('gcttt')}"
    except metadata.PackageNotFoundError:
        return "gcttt-unknown"


def write_manifest(out_dir: Path, command: str, cfg: RunConfig, extra: dict | None = None) -> Path:
    """manifest_<command>.json: everything needed to rerun the command, no timestamps."""
    manifest = {
        "command": command,
        "config": config_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "build_id": build_id(),
        "seed": cfg.seed,
        **(extra or {}),
    }
    path = Path(out_dir) / f"manifest_{command}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info("wrote manifest %s", path)
    return path


REPLAYED_ARGUMENTS = ("mode", "K", "dump_selections")


def manifest_arguments(path: Path | None, command: str) -> dict:
    """
    command-line arguments recorded in a manifest of the same command.

    args:
        path: the --config path; anything other than a JSON manifest yields {}
        command: manifest name of the command being run (dashes as underscores)

    returns:
        the recorded subset of REPLAYED_ARGUMENTS
    """
    if path is None or Path(path).suffix != ".json":
        return {}
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict) or raw.get("command") != command:
        return {}
    return {key: raw[key] for key in REPLAYED_ARGUMENTS if key in raw}
