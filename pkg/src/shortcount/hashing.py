"""Seeded 64-bit hashing for flow keys, row indexing, and fingerprints.

Flow identifiers are arbitrary byte strings. They are first folded to a
64-bit value with FNV-1a; per-row (or per-purpose) dispersal then mixes that
value with a seed through the SplitMix64 finalizer. The compiled kernels
reimplement ``mix64`` with the same constants, so indices agree across
backends; ``test_backends`` pins this with shared test vectors.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def fnv1a64(data: bytes) -> int:
    """Fold a byte string to 64 bits (FNV-1a)."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def mix64(x: int) -> int:
    """SplitMix64 finalizer: bijective avalanche mix of a 64-bit value."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def mix64_np(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array (wrapping arithmetic)."""
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= np.uint64(_MIX1)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_MIX2)
        x ^= x >> np.uint64(31)
    return x


def row_index(key64: int, seed: int, width: int) -> int:
    """Map a folded key into [0, width) under the given seed."""
    return mix64(key64 ^ seed) % width


def fingerprint(key64: int, seed: int, bits: int) -> int:
    """Low `bits` bits of the seeded mix of a folded key."""
    return mix64(key64 ^ seed) & ((1 << bits) - 1)


def derive_seed(master: int, index: int) -> int:
    """Deterministic child seed for worker/trial/row number `index`."""
    return mix64((master + 0x9E3779B97F4A7C15 * (index + 1)) & _MASK64)
