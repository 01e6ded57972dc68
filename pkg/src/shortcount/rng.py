"""Seedable randomness with the exact samplers the counting algorithms need.

``RngState(seed)`` builds a generator from the active backend (compiled when
available). The module-level functions mirror the generator methods for
callers that prefer a functional style; both forms validate their arguments
the same way. The generator algorithm is SplitMix64 and is fixed per release:
identical (seed, call sequence) pairs give identical outputs on every
platform and backend.
"""

from __future__ import annotations

from . import backend
from .hashing import derive_seed

__all__ = [
    "RngState",
    "uniform01",
    "bernoulli",
    "binomial",
    "geometric",
    "derive_seed",
]


def RngState(seed: int):
    """New generator state for the given 64-bit seed."""
    return backend.kernels().RngState(seed)


def uniform01(rng) -> float:
    """Uniform draw in [0, 1)."""
    return rng.uniform01()


def bernoulli(rng, q: float) -> bool:
    """True with probability q; q must lie in [0, 1]."""
    return rng.bernoulli(q)


def binomial(rng, n: int, q: float) -> int:
    """A Bin(n, q) draw; 0 <= result <= n."""
    return rng.binomial(n, q)


def geometric(rng, p: float) -> int:
    """A Geo(p) draw, Pr[G=x] = p(1-p)^(x-1), always >= 1."""
    return rng.geometric(p)
