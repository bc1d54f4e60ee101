"""Deterministic random-stream derivation.

All randomness flows from a single non-negative integer seed. Independent
substreams are derived from (seed, name, *indices) so that every draw in a
run is reproducible from the seed recorded in the manifest.
"""

import zlib

import numpy as np


def _encode(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def _entropy(seed, name, indices):
    return [int(seed) & 0xFFFFFFFF, _encode(name)] + [_encode(i) for i in indices]


def substream(seed, name: str, *indices) -> np.random.Generator:
    """Generator for the named substream of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, name, indices)))


def derive_seed(seed, name: str, *indices) -> int:
    """Collapse a named substream to a plain integer seed."""
    ss = np.random.SeedSequence(_entropy(seed, name, indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
