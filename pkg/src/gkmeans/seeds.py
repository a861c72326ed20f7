"""Deterministic seed derivation on top of numpy's Philox generator.

Sub-streams are keyed by integer (or string) paths appended to a root
SeedSequence's spawn key, so trials, starts, and inner fits draw from
independent streams whose identity does not depend on execution order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def child_seed(parent: np.random.SeedSequence, *key) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream at ``key`` below ``parent``."""
    parts = tuple(_key_part(p) for p in key)
    return np.random.SeedSequence(
        entropy=parent.entropy, spawn_key=tuple(parent.spawn_key) + parts
    )


def generator_from(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    """Counter-based generator (Philox) for a derived seed sequence."""
    return np.random.Generator(np.random.Philox(seed_seq))


def generator(master_seed: int, *key) -> np.random.Generator:
    """Generator for the sub-stream at ``key`` below a master seed."""
    return generator_from(child_seed(np.random.SeedSequence(master_seed), *key))
