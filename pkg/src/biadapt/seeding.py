"""Explicit seed plumbing.

No module touches global RNG state. Child streams are derived from a master
seed and a tuple of keys with :func:`derive_seed`, which feeds the key words
into :class:`numpy.random.SeedSequence`. String keys are hashed with BLAKE2b
(8 bytes, little-endian) so the split is stable across processes and platforms.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def _word(key) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")
    return int(key) & MASK64


def derive_seed(master: int, *keys) -> int:
    """Return a 64-bit child seed for the stream named by ``keys``."""
    words = [_word(master)] + [_word(k) for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def rng_for(master: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
