"""Deterministic seed derivation.

Every stochastic component draws its randomness from a stream derived from
(root seed, component tags). Derivation is hash-based so it is stable across
runs, platforms, and process boundaries, and adding a new tagged stream never
perturbs existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest_words(root: int, tags: tuple) -> list[int]:
    key = "/".join([str(int(root)), *map(str, tags)])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def derive_seed_sequence(root: int, *tags) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by (root, *tags)."""
    return np.random.SeedSequence(_digest_words(root, tags))


def derive_rng(root: int, *tags) -> np.random.Generator:
    """Fresh Generator for the stream identified by (root, *tags)."""
    return np.random.default_rng(derive_seed_sequence(root, *tags))


def child_seed(root: int, *tags) -> int:
    """63-bit integer seed for components that take a plain int."""
    words = _digest_words(root, tags)
    return ((words[0] << 32) | words[1]) & 0x7FFF_FFFF_FFFF_FFFF
