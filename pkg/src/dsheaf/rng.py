"""Deterministic seed-stream derivation.

Every random decision in the package flows from an integer seed plus a stream
name, so independent concerns (graph sampling, splits, parameter init,
dropout) never share or reorder draws.
"""

import hashlib

import numpy as np


def stream_seed(seed: int, name: str) -> int:
    """Derive a 64-bit child seed for the named stream of ``seed``."""
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def stream_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for the named sub-stream of ``seed``."""
    return np.random.default_rng(stream_seed(seed, name))
