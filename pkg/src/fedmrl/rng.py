"""Deterministic named RNG streams.

One master seed fans out into independent substreams identified by arbitrary
keys (strings, ints, tuples), so each subsystem -- partitioning, model init,
every client's per-round shuffle, the RL controller, the SOM -- draws from an
isolated source and stays reproducible regardless of what the others consume.
Keys are hashed with SHA-256, not Python's salted ``hash``, so streams are
stable across processes.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 63) - 1


def _key_words(keys) -> list[int]:
    words = []
    for key in keys:
        digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
        words.append(int.from_bytes(digest[:8], "big"))
    return words


def seed_sequence(master_seed: int, *keys) -> np.random.SeedSequence:
    """Build the SeedSequence for the named substream of ``master_seed``."""
    return np.random.SeedSequence([int(master_seed) & _MASK, *_key_words(keys)])


def named_rng(master_seed: int, *keys) -> np.random.Generator:
    """Generator for the named substream of ``master_seed``."""
    return np.random.default_rng(seed_sequence(master_seed, *keys))


def derived_seed(master_seed: int, *keys) -> int:
    """Plain integer seed derived from a named substream (for seed fields)."""
    return int(seed_sequence(master_seed, *keys).generate_state(1)[0])
