"""Deterministic per-task random streams."""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_stream", "label_key"]


def label_key(label: str) -> int:
    # stable across interpreter runs, unlike hash()
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def derive_stream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """A Philox generator keyed by ``(master_seed, label, index)``."""
    if master_seed < 0 or index < 0:
        raise ValueError("seed and index must be nonnegative")
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(label_key(label), int(index)))
    return np.random.Generator(np.random.Philox(seq))
