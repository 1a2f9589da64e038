"""
static SVG figures for ablation, frequency-sweep and model-scaling tables.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

# fixed ids and no date keep the SVG bytes stable across runs
matplotlib.rcParams["svg.hashsalt"] = "gcttt"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return path


def bar_chart(df: pd.DataFrame, x: str, y: str, yerr: str | None, path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(df[x].astype(str), df[y], yerr=df[yerr] if yerr else None, capsize=4, color="tab:blue")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def line_chart(
    df: pd.DataFrame,
    x: str,
    series: list[tuple[str, str | None, str]],
    path: Path,
    xlabel: str = "",
    ylabel: str = "success rate",
    title: str = "",
) -> Path:
    """series: (y column, y error column or None, legend label)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for y, yerr, label in series:
        ax.errorbar(df[x], df[y], yerr=df[yerr] if yerr else None, marker="o", capsize=4, label=label)
    ax.set_xscale("log")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel(xlabel or x)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend()
    if title:
        ax.set_title(title)
    return _save(fig, path)
