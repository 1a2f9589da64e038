"""
plain-text maze layouts.

file format: header "gcttt-maze v1 rows cols cell_size" followed by `rows` lines of
`cols` characters: '#' wall, '.' free, 'S' start, 'G' evaluation goal.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from common.errors import ConfigurationError, MissingArtifactError

logger = logging.getLogger(__name__)

LAYOUT_DIR = Path(__file__).parent / "layouts"
HEADER_TAG = "gcttt-maze"
FORMAT_VERSION = "v1"


@dataclass(frozen=True, eq=False)
class MazeLayout:
    name: str
    walls: np.ndarray
    cell_size: float = 1.0
    starts: tuple[tuple[int, int], ...] = ()
    goals: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        walls = np.array(self.walls, dtype=bool)
        if walls.ndim != 2 or min(walls.shape) < 3:
            raise ConfigurationError(f"layout '{self.name}' must be a 2D grid of at least 3x3")
        if not (walls[0].all() and walls[-1].all() and walls[:, 0].all() and walls[:, -1].all()):
            raise ConfigurationError(f"layout '{self.name}' border must be walls")
        if not self.cell_size > 0:
            raise ConfigurationError(f"cell_size must be positive, got {self.cell_size}")
        walls.setflags(write=False)
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "starts", tuple((int(r), int(c)) for r, c in self.starts))
        object.__setattr__(self, "goals", tuple((int(r), int(c)) for r, c in self.goals))

        free = self.free_cells
        if len(free) < 2:
            raise ConfigurationError(f"layout '{self.name}' needs at least 2 free cells")
        for cell in self.starts + self.goals:
            if walls[cell]:
                raise ConfigurationError(f"annotated cell {cell} in '{self.name}' is a wall")
        if not nx.is_connected(self.graph):
            raise ConfigurationError(f"free region of layout '{self.name}' is not connected")

    @property
    def shape(self) -> tuple[int, int]:
        return self.walls.shape

    @cached_property
    def free_cells(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(~self.walls)
        return [(int(r), int(c)) for r, c in zip(rows, cols)]

    @cached_property
    def graph(self) -> nx.Graph:
        """4-connected graph over free cells, nodes are (row, col)."""
        G = nx.grid_2d_graph(*self.walls.shape)
        G.remove_nodes_from([(int(r), int(c)) for r, c in zip(*np.nonzero(self.walls))])
        return G

    def is_free(self, cell: tuple[int, int]) -> bool:
        r, c = cell
        rows, cols = self.walls.shape
        return 0 <= r < rows and 0 <= c < cols and not self.walls[r, c]

    def start_cells(self) -> tuple[tuple[int, int], ...]:
        """Designated starts, or every free cell when none are annotated."""
        return self.starts or tuple(self.free_cells)


def parse_layout(text: str, name: str = "custom") -> MazeLayout:
    lines = [line.rstrip("\n\r") for line in text.strip().splitlines()]
    if not lines:
        raise ConfigurationError(f"layout '{name}' is empty")
    header = lines[0].split()
    if len(header) != 5 or header[0] != HEADER_TAG:
        raise ConfigurationError(f"layout '{name}' has a malformed header: {lines[0]!r}")
    if header[1] != FORMAT_VERSION:
        raise ConfigurationError(f"layout '{name}' uses unsupported version {header[1]}")
    try:
        rows, cols, cell_size = int(header[2]), int(header[3]), float(header[4])
    except ValueError as e:
        raise ConfigurationError(f"layout '{name}' header values are invalid") from e

    grid = lines[1:]
    if len(grid) != rows or any(len(line) != cols for line in grid):
        raise ConfigurationError(f"layout '{name}' grid does not match {rows}x{cols}")

    walls = np.zeros((rows, cols), dtype=bool)
    starts, goals = [], []
    for r, line in enumerate(grid):
        for c, ch in enumerate(line):
            if ch == "#":
                walls[r, c] = True
            elif ch == "S":
                starts.append((r, c))
            elif ch == "G":
                goals.append((r, c))
            elif ch != ".":
                raise ConfigurationError(f"layout '{name}' has unknown cell {ch!r} at {(r, c)}")
    return MazeLayout(name, walls, cell_size, tuple(starts), tuple(goals))


def layout_to_text(layout: MazeLayout) -> str:
    rows, cols = layout.shape
    chars = np.where(layout.walls, "#", ".").astype("<U1")
    for r, c in layout.starts:
        chars[r, c] = "S"
    for r, c in layout.goals:
        chars[r, c] = "G"
    body = "\n".join("".join(row) for row in chars)
    return f"{HEADER_TAG} {FORMAT_VERSION} {rows} {cols} {layout.cell_size}\n{body}\n"


def load_layout(name_or_path: str | Path) -> MazeLayout:
    """Load a shipped layout by name (e.g. 'grid-medium') or any layout file by path."""
    path = Path(name_or_path)
    if not path.suffix:
        path = LAYOUT_DIR / f"{name_or_path}.txt"
    if not path.exists():
        raise MissingArtifactError(f"maze layout {name_or_path!r} not found at {path}")
    name = path.stem
    layout = parse_layout(path.read_text(), name)
    logger.debug("loaded layout %s (%dx%d, cell %.2f)", name, *layout.shape, layout.cell_size)
    return layout
