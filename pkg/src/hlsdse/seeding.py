"""Root-seed fan-out: each component draws from its own stream keyed by name."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, name: str) -> int:
    digest = hashlib.sha256(f"{int(root)}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def component_rng(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, name))
