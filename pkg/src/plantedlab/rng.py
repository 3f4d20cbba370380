"""Deterministic stream derivation from a single master seed.

Contract: trial t of any experiment uses the generator returned by
``derive_stream(master_seed, t)``.  The stream seed is produced by mixing
(master_seed, t) through splitmix64, so serial and parallel runs agree
bit-exactly and distinct trials get statistically independent PCG64 streams.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 mixing round; a fixed 64-bit hash."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix_seed(master_seed: int, index: int) -> int:
    """64-bit stream seed for sub-stream ``index`` of ``master_seed``."""
    return splitmix64(splitmix64(master_seed & _MASK64) ^ (index & _MASK64))


def derive_stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Generator for sub-stream ``index``; pure function of its arguments."""
    return np.random.Generator(np.random.PCG64(mix_seed(master_seed, index)))
