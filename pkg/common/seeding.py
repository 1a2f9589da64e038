"""
master-seed splitting: every component seed is a hash of (master, role, index).
"""

import hashlib

import numpy as np


def derive_seed(master: int, role: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{master}:{role}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def rng_for(master: int, role: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, role, index))
