"""
binary parameter container.

layout (little-endian): magic "GCTT", u16 format version, u8 role tag, u8 activation
code, u32 number of layer dims, u32 per dim, float64 weights, u32 aux count, float64
aux values (log_std for policies, tau for critics), trailing CRC32 over everything before.
"""

import logging
import struct
import zlib
from pathlib import Path

import numpy as np

from common.errors import ConfigurationError, FormatVersionError, IntegrityError, MissingArtifactError
from tensor_nn.mlp import ParamStore, param_count

logger = logging.getLogger(__name__)

MAGIC = b"GCTT"
FORMAT_VERSION = 1
ROLE_TAGS = {"policy": 0, "q": 1, "v": 2, "q_target": 3, "v_target": 4}
ROLE_NAMES = {tag: name for name, tag in ROLE_TAGS.items()}
ACTIVATION_CODES = {"tanh": 0}
ACTIVATION_NAMES = {code: name for name, code in ACTIVATION_CODES.items()}
_HEADER = struct.Struct("<4sHBBI")


def snapshot(params: ParamStore, role: str = "policy", aux: np.ndarray | None = None) -> bytes:
    if role not in ROLE_TAGS:
        raise ConfigurationError(f"unknown role {role!r}")
    aux = np.zeros(0) if aux is None else np.asarray(aux, dtype=np.float64).reshape(-1)
    body = b"".join(
        [
            _HEADER.pack(MAGIC, FORMAT_VERSION, ROLE_TAGS[role], ACTIVATION_CODES[params.activation], len(params.layer_dims)),
            struct.pack(f"<{len(params.layer_dims)}I", *params.layer_dims),
            params.weights.astype("<f8").tobytes(),
            struct.pack("<I", aux.size),
            aux.astype("<f8").tobytes(),
        ]
    )
    return body + struct.pack("<I", zlib.crc32(body))


def restore_with_meta(blob: bytes) -> tuple[ParamStore, str, np.ndarray]:
    if len(blob) < _HEADER.size + 4:
        raise IntegrityError("checkpoint blob is truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise IntegrityError("checkpoint checksum mismatch")
    magic, version, role_tag, act_code, n_dims = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise IntegrityError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"checkpoint format v{version}, expected v{FORMAT_VERSION}")
    if role_tag not in ROLE_NAMES or act_code not in ACTIVATION_NAMES:
        raise IntegrityError("unknown role or activation code")
    try:
        offset = _HEADER.size
        dims = struct.unpack_from(f"<{n_dims}I", body, offset)
        offset += 4 * n_dims
        count = param_count(dims)
        weights = np.frombuffer(body, dtype="<f8", count=count, offset=offset).astype(np.float64)
        offset += 8 * count
        (n_aux,) = struct.unpack_from("<I", body, offset)
        offset += 4
        aux = np.frombuffer(body, dtype="<f8", count=n_aux, offset=offset).astype(np.float64)
        offset += 8 * n_aux
    except (struct.error, ValueError) as e:
        raise IntegrityError(f"malformed checkpoint body: {e}") from e
    if offset != len(body):
        raise IntegrityError("trailing bytes in checkpoint body")
    params = ParamStore(dims, weights, ACTIVATION_NAMES[act_code])
    return params, ROLE_NAMES[role_tag], aux


def restore(blob: bytes) -> ParamStore:
    return restore_with_meta(blob)[0]


def save_params(path: Path, params: ParamStore, role: str, aux: np.ndarray | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(snapshot(params, role, aux))
    logger.debug("wrote %s parameters to %s", role, path)


def load_params(path: Path) -> tuple[ParamStore, str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint file {path} does not exist")
    return restore_with_meta(path.read_bytes())
