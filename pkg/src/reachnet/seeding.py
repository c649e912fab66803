"""Labeled seed derivation so each pipeline stage gets an independent stream.

Changing the seed of one stage (walks, anchor sampling, parameter init,
splits, dropout, attacks) must not perturb any other stage, so every
consumer derives its generator from (root seed, stable label) instead of
sharing one stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["label_hash", "derive_seed", "derive_rng"]


def label_hash(label: str) -> int:
    """Stable 64-bit digest of a label, independent of PYTHONHASHSEED."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(root: int, label: str, index: int = 0) -> int:
    """Deterministic child seed for a named purpose (optionally indexed)."""
    mixed = hashlib.blake2b(digest_size=8)
    mixed.update(int(root).to_bytes(16, "little", signed=True))
    mixed.update(label.encode("utf-8"))
    mixed.update(int(index).to_bytes(16, "little", signed=True))
    return int.from_bytes(mixed.digest(), "little")


def derive_rng(root: int, label: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, label, index))
