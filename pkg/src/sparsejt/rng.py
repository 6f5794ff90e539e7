"""Counter-based random substreams.

Every random draw in the package comes from a Philox generator whose key is
hashed from ``(seed, *tag)`` and whose counter's top word is a trial index.
Trials therefore never share state, and results do not depend on the order
in which trials are executed.
"""

from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 0

_MASK64 = (1 << 64) - 1


def _tag_words(tag: tuple) -> list[int]:
    words = []
    for item in tag:
        if isinstance(item, (int, np.integer)):
            words.append(int(item) & 0xFFFFFFFF)
            words.append((int(item) >> 32) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(item).encode()))
    return words


def substream(seed: int, trial: int = 0, *tag) -> np.random.Generator:
    """Generator for trial ``trial`` of the stream named by ``tag``."""
    if seed < 0 or trial < 0:
        raise ValueError("seed and trial must be non-negative")
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=_tag_words(tag))
    key = ss.generate_state(2, np.uint64)
    counter = np.array([0, 0, 0, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def derive_seed(seed: int, *tag) -> int:
    """Deterministic 64-bit child seed, e.g. for a grid point or a trial."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=_tag_words(tag))
    return int(ss.generate_state(1, np.uint64)[0])
