"""Arrays of short registers sharing one sampling probability.

Because all registers in the array share ``p``, the sum of raw values across
the array stays near ``n_prime`` no matter how the stream is distributed, and
exceeds ``n_tilde = n_prime + sqrt(3 * n_prime * ln(1/delta_o))`` with
probability at most ``delta_o``. Slots can therefore be much narrower than
the worst single register would need: a slot holds values below a threshold
``T``, and the few slots that reach ``T`` ("heavy" slots) wrap around and
carry their high-order units into a small associative extension table. By a
pigeonhole argument the table can never hold more than
``floor(total_increments / T)`` entries, and stays within
``floor(n_tilde / T)`` unless the stream oversamples (probability delta_o).

Space accounting reports two figures. The analytical figure prices slots at
``ceil(log2 T)`` bits and each *potential* heavy entry at index bits plus a
2-bit table overhead (the constant that reproduces the worked byte totals of
the packed-table design this accounting assumes). The actual figure prices
what this implementation stores: byte-aligned slots plus, per current heavy
entry, a byte-aligned index and extension with no overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .estimator import SamplingParams

__all__ = [
    "ArrayConfig",
    "EstimatorArray",
    "oversampling_bound",
    "choose_threshold",
]

# Analytical per-heavy-entry overhead on top of the index bits.
HEAVY_OVERHEAD_BITS = 2


def oversampling_bound(n_prime: int, delta_o: float) -> float:
    """High-probability cap on total successful increments across an array.

    Returns n_prime + sqrt(3 * n_prime * ln(1/delta_o)); the total exceeds
    this with probability at most delta_o.
    """
    if n_prime < 0:
        raise ParameterError(f"n_prime must be >= 0, got {n_prime}")
    if not 0.0 < delta_o <= 1.0:
        raise ParameterError(f"delta_o must be in (0, 1], got {delta_o}")
    return n_prime + math.sqrt(3.0 * n_prime * math.log(1.0 / delta_o))


def choose_threshold(width: int, params: SamplingParams, delta_o: float) -> int:
    """Smallest byte-aligned power of two covering the space-optimal slot cap.

    The optimizer balances slot width against heavy-table growth at
    T ~= n_tilde * log2(w) / (w * log2(n_prime * log2(w) / w)); the result is
    rounded up to 2^(8z) so slots stay byte aligned. Degenerate shapes
    (width 1, or so few expected increments that the optimizer is undefined)
    fall back to full-width slots of 2^required_bits, which disables the
    heavy table.
    """
    if width < 1:
        raise ParameterError(f"width must be >= 1, got {width}")
    full = 1 << params.required_bits
    if width < 2:
        return full
    log2w = math.log2(width)
    inner = params.n_prime * log2w / width
    if inner <= 1.0:
        return full
    n_tilde = oversampling_bound(params.n_prime, delta_o)
    t_opt = n_tilde * log2w / (width * math.log2(inner))
    z = 1
    while (1 << (8 * z)) < t_opt:
        z += 1
    t = 1 << (8 * z)
    return t if t <= params.n_prime else full


@dataclass(frozen=True)
class ArrayConfig:
    """Derived shape of an estimator array."""

    width: int
    threshold: int
    delta_o: float
    n_tilde: float

    @property
    def slot_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.threshold)))

    @property
    def index_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.width))) if self.width > 1 else 1

    @property
    def heavy_capacity(self) -> int:
        """Heavy entries the contract allows: floor(n_tilde / threshold)."""
        return int(self.n_tilde // self.threshold)


class EstimatorArray:
    """``width`` fixed-width slots plus the heavy extension table."""

    def __init__(self, width: int, params: SamplingParams,
                 delta_o: float = 2e-15, threshold: int | None = None):
        if width < 1:
            raise ParameterError(f"width must be >= 1, got {width}")
        if not 0.0 < delta_o < 1.0:
            raise ParameterError(f"delta_o must be in (0, 1), got {delta_o}")
        if threshold is None:
            threshold = choose_threshold(width, params, delta_o)
        elif threshold < 2 or (threshold & (threshold - 1)) != 0:
            raise ParameterError(f"threshold must be a power of two >= 2, got {threshold}")
        self.params = params
        self.config = ArrayConfig(width=width, threshold=threshold, delta_o=delta_o,
                                  n_tilde=oversampling_bound(params.n_prime, delta_o))
        self.lows = [0] * width
        self.heavy: dict[int, int] = {}
        self.total_increments = 0
        self.over_budget = False

    @property
    def width(self) -> int:
        return self.config.width

    @property
    def threshold(self) -> int:
        return self.config.threshold

    @property
    def heavy_capacity(self) -> int:
        return self.config.heavy_capacity

    def _bump(self, i: int, inc: int) -> None:
        low = self.lows[i] + inc
        if low >= self.threshold:
            carry, low = divmod(low, self.threshold)
            before = self.heavy.get(i, 0)
            self.heavy[i] = before + carry
            if before == 0 and len(self.heavy) > self.heavy_capacity:
                # Out of contract (oversampling); keep counting, flag the epoch.
                self.over_budget = True
        self.lows[i] = low
        self.total_increments += inc

    def pincrement(self, i: int, rng) -> None:
        """Count one unit toward slot ``i`` with probability p."""
        if not 0 <= i < self.width:
            raise IndexError(f"slot {i} out of range [0, {self.width})")
        if rng.bernoulli(self.params.p):
            self._bump(i, 1)

    def add(self, i: int, w: int, rng) -> None:
        """Count ``w`` units toward slot ``i`` (deterministic part plus coin)."""
        if not 0 <= i < self.width:
            raise IndexError(f"slot {i} out of range [0, {self.width})")
        if w < 0:
            raise ParameterError(f"weight must be >= 0, got {w}")
        wp = w * self.params.p
        w1 = int(math.floor(wp))
        inc = w1 + (1 if rng.bernoulli(wp - w1) else 0)
        if inc:
            self._bump(i, inc)

    def raw_count(self, i: int) -> int:
        """Reassembled raw units for slot ``i``: low bits plus threshold * extension."""
        if not 0 <= i < self.width:
            raise IndexError(f"slot {i} out of range [0, {self.width})")
        return self.lows[i] + self.threshold * self.heavy.get(i, 0)

    def query(self, i: int) -> float:
        """Estimated units routed to slot ``i``."""
        return self.raw_count(i) / self.params.p

    def memory_analytical_bytes(self) -> float:
        """Contract-level size: w*ceil(log2 T) + capacity*(index_bits + 2) bits."""
        cfg = self.config
        bits = cfg.width * cfg.slot_bits
        bits += cfg.heavy_capacity * (cfg.index_bits + HEAVY_OVERHEAD_BITS)
        return bits / 8.0

    def memory_actual_bytes(self) -> int:
        """Size of this packed layout with the heavy table at its current fill."""
        cfg = self.config
        ext_bits = max(1, math.ceil(math.log2(1 + max(1, cfg.heavy_capacity))))
        entry_bytes = math.ceil(cfg.index_bits / 8) + math.ceil(ext_bits / 8)
        return cfg.width * math.ceil(cfg.slot_bits / 8) + len(self.heavy) * entry_bytes
