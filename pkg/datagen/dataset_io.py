"""
dataset file format (little-endian):

    b"GCTTDS v1\\n"
    u16 len + layout name, u16 len + regime, u32 len + metadata as sorted JSON
    u32 trajectory count
    per trajectory: u32 T, u8 source tag, u8 has_goal, (T+1)x2 f64 states,
                    Tx2 f64 actions, 2 f64 goal if has_goal
    u32 CRC32 of everything above
"""

import json
import logging
import struct
import zlib
from pathlib import Path

import numpy as np

from common.errors import ConfigurationError, FormatVersionError, IntegrityError, MissingArtifactError
from datagen.trajectories import SOURCE_TAGS, OfflineDataset, Trajectory

logger = logging.getLogger(__name__)

MAGIC = b"GCTTDS "
VERSION = b"v1"
STATE_DIM = 2
ACTION_DIM = 2


def _pack_str(fmt: str, text: str) -> bytes:
    raw = text.encode()
    return struct.pack(fmt, len(raw)) + raw


def dataset_to_bytes(ds: OfflineDataset) -> bytes:
    if len(ds) == 0:
        raise ConfigurationError("refusing to save an empty dataset")
    parts = [
        MAGIC + VERSION + b"\n",
        _pack_str("<H", ds.layout_name),
        _pack_str("<H", ds.regime),
        _pack_str("<I", json.dumps(ds.metadata, sort_keys=True)),
        struct.pack("<I", len(ds)),
    ]
    for traj in ds.trajectories:
        has_goal = traj.goal is not None
        parts.append(struct.pack("<IBB", traj.length, SOURCE_TAGS.index(traj.source_tag), has_goal))
        parts.append(traj.states.astype("<f8").tobytes())
        parts.append(traj.actions.astype("<f8").tobytes())
        if has_goal:
            parts.append(traj.goal.astype("<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, body: bytes):
        self.body = body
        self.offset = 0

    def unpack(self, fmt: str):
        values = struct.unpack_from(fmt, self.body, self.offset)
        self.offset += struct.calcsize(fmt)
        return values

    def text(self, fmt: str) -> str:
        (n,) = self.unpack(fmt)
        raw = self.body[self.offset : self.offset + n]
        if len(raw) != n:
            raise IntegrityError("dataset string field is truncated")
        self.offset += n
        return raw.decode()

    def floats(self, rows: int, cols: int) -> np.ndarray:
        count = rows * cols
        arr = np.frombuffer(self.body, dtype="<f8", count=count, offset=self.offset)
        self.offset += 8 * count
        return arr.astype(np.float64).reshape(rows, cols)


def dataset_from_bytes(blob: bytes) -> OfflineDataset:
    header = MAGIC + VERSION + b"\n"
    if len(blob) < len(header) + 4:
        raise IntegrityError("dataset file is truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise IntegrityError("dataset checksum mismatch")
    if not body.startswith(MAGIC):
        raise IntegrityError("not a dataset file (bad magic)")
    if not body.startswith(header):
        version = body[len(MAGIC) : body.find(b"\n")].decode(errors="replace")
        raise FormatVersionError(f"dataset format {version}, expected {VERSION.decode()}")

    reader = _Reader(body)
    reader.offset = len(header)
    try:
        layout_name = reader.text("<H")
        regime = reader.text("<H")
        metadata = json.loads(reader.text("<I"))
        (n_traj,) = reader.unpack("<I")
        trajectories = []
        for _ in range(n_traj):
            length, tag, has_goal = reader.unpack("<IBB")
            states = reader.floats(length + 1, STATE_DIM)
            actions = reader.floats(length, ACTION_DIM)
            goal = reader.floats(1, STATE_DIM)[0] if has_goal else None
            trajectories.append(Trajectory(states, actions, SOURCE_TAGS[tag], goal))
    except (struct.error, ValueError, IndexError) as e:
        raise IntegrityError(f"malformed dataset body: {e}") from e
    if reader.offset != len(body):
        raise IntegrityError("trailing bytes in dataset file")
    return OfflineDataset(tuple(trajectories), layout_name, regime, metadata)


def save_dataset(ds: OfflineDataset, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dataset_to_bytes(ds))
    logger.info("saved %d trajectories (%d transitions) to %s", len(ds), ds.n_transitions, path)


def load_dataset(path: Path) -> OfflineDataset:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"dataset file {path} does not exist; run gen-data first")
    ds = dataset_from_bytes(path.read_bytes())
    logger.info("loaded %d trajectories from %s", len(ds), path)
    return ds
