"""Cache-based heavy-hitter counting: evict-min caches with optional
fingerprint keys and sampled counters.

Policies:

* space-saving: a resident key's counter grows by the update weight; a new
  key on a full cache replaces a minimal entry and starts at that entry's
  count plus the weight, so estimates never undershoot and the minimal count
  stays below total/capacity.
* rap: like space-saving, but a new key displaces a minimal entry only with
  probability w/(m+w) (unit streams: 1/(m+1)), which protects the cache from
  churn caused by one-packet flows.
* Either policy can run set-associative ("d-way"): keys hash to a fixed set
  of `ways` slots and the policy applies within the set.

With sampled counters (counter_mode="aee") each update first converts its
weight into raw units - floor(w*p) plus a coin for the residue - and the
cache is only touched when at least one raw unit survived, so at small p most
packets cost nothing. Counts are stored in raw units and scaled by 1/p on
query.

Keys can be stored whole or as short hashed fingerprints. A fingerprint of
``fingerprint_length(alpha, eps_f, delta_f)`` bits keeps the total weight of
colliding flows below eps_f * total with probability 1 - delta_f, which is
all an additive-error cache needs; matching resident fingerprints are
deliberately treated as the same flow.

Eviction ties (several minimal entries) always break toward the lowest slot
index, so runs are reproducible and the set-associative and fully-associative
paths agree when ways == capacity.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import ParameterError
from .estimator import SamplingParams
from .hashing import fingerprint as _fingerprint
from .hashing import derive_seed, fnv1a64, mix64

__all__ = [
    "CacheTable",
    "FingerprintSpec",
    "fingerprint_length",
    "collision_failure_prob",
    "entry_footprint",
    "cache_footprint_bytes",
]

FULL_ID_BYTES = 13  # conventional five-tuple flow identifier


def fingerprint_length(alpha: float, eps_f: float, delta_f: float) -> int:
    """Fingerprint bits so colliding volume stays under eps_f*N w.p. 1-delta_f.

    L = ceil(max(log2(1/(alpha*eps_f*delta_f)), log2(e/eps_f * delta_f^-alpha))).
    ``alpha`` splits flows into large and small for the underlying argument;
    10/11 is a good general-purpose value.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    if not 0.0 < eps_f < 1.0 or not 0.0 < delta_f < 1.0:
        raise ParameterError("eps_f and delta_f must be in (0, 1)")
    t1 = math.log2(1.0 / (alpha * eps_f * delta_f))
    t2 = math.log2(math.e / eps_f) - alpha * math.log2(delta_f)
    return math.ceil(max(t1, t2))


def collision_failure_prob(length_bits: int, alpha: float, eps_f: float,
                           s_large: float, s_small: float, n_total: float) -> float:
    """Failure probability of an L-bit fingerprint for one large/small split.

    ``s_large``/``s_small`` are the total weights of flows above/below
    alpha*eps_f*n_total. Returns
    (1/alpha) * 2^-L * s_large/(N*eps_f) + (e * 2^-L * s_small/(N*eps_f))^(1/alpha).
    """
    if s_large < 0 or s_small < 0 or s_large + s_small > n_total:
        raise ParameterError("need s_large, s_small >= 0 with sum <= n_total")
    if n_total <= 0:
        raise ParameterError(f"n_total must be > 0, got {n_total}")
    scale = 2.0 ** -length_bits / (n_total * eps_f)
    term_large = (1.0 / alpha) * scale * s_large
    term_small = (math.e * scale * s_small) ** (1.0 / alpha)
    return term_large + term_small


@dataclass(frozen=True)
class FingerprintSpec:
    """Sizing of hashed keys for a collision budget (eps_f, delta_f)."""

    alpha: float
    eps_f: float
    delta_f: float
    length_bits: int

    @classmethod
    def make(cls, eps_f: float, delta_f: float, alpha: float = 10.0 / 11.0):
        return cls(alpha=alpha, eps_f=eps_f, delta_f=delta_f,
                   length_bits=fingerprint_length(alpha, eps_f, delta_f))


class CacheTable:
    """Capacity-bounded (key, count) table under an evict-min policy."""

    def __init__(self, capacity: int, policy: str = "space-saving",
                 ways: int | None = None, counter_mode: str = "exact",
                 params: SamplingParams | None = None,
                 key_mode: str = "full", fingerprint_bits: int | None = None,
                 seed: int = 0, absent_returns_min: bool = False):
        if capacity < 1:
            raise ParameterError(f"capacity must be >= 1, got {capacity}")
        if policy not in ("space-saving", "rap"):
            raise ParameterError(f"unknown policy: {policy!r}")
        if counter_mode not in ("exact", "aee"):
            raise ParameterError(f"unknown counter mode: {counter_mode!r}")
        if counter_mode == "aee" and params is None:
            raise ParameterError("aee counter mode needs SamplingParams")
        if key_mode not in ("full", "fingerprint"):
            raise ParameterError(f"unknown key mode: {key_mode!r}")
        if key_mode == "fingerprint" and not fingerprint_bits:
            raise ParameterError("fingerprint key mode needs fingerprint_bits")
        if ways is not None:
            if ways < 1 or capacity % ways != 0:
                raise ParameterError(
                    f"capacity {capacity} must be a multiple of ways {ways}")
        self.capacity = capacity
        self.policy = policy
        self.ways = ways
        self.counter_mode = counter_mode
        self.params = params
        self.key_mode = key_mode
        self.fingerprint_bits = fingerprint_bits
        self.absent_returns_min = absent_returns_min
        self._fp_seed = derive_seed(seed, 101)
        self._set_seed = derive_seed(seed, 202)
        self._keys: list[int | None] = [None] * capacity
        self._counts = [0] * capacity
        self._slot_of: dict[int, int] = {}
        if ways is None:
            self._heap: list[tuple[int, int]] = []
            self._next_free = 0
        else:
            self._n_sets = capacity // ways
        self.total_weight = 0  # weight accepted into raw units (post-sampling)

    # -- key folding -----------------------------------------------------

    def _fold(self, key: bytes) -> int:
        key64 = fnv1a64(key)
        if self.key_mode == "fingerprint":
            return _fingerprint(key64, self._fp_seed, self.fingerprint_bits)
        return key64

    # -- update ----------------------------------------------------------

    def _sampled_units(self, w: int, rng) -> int:
        if self.counter_mode == "exact":
            return w
        wp = w * self.params.p
        w1 = int(math.floor(wp))
        return w1 + (1 if rng.bernoulli(wp - w1) else 0)

    def fold_key(self, key: bytes) -> int:
        """Stored identity of a flow id (full hash or fingerprint bits)."""
        return self._fold(key)

    def update(self, key: bytes, w: int = 1, rng=None) -> None:
        """Count ``w`` units for ``key`` under the configured policy."""
        self.update_folded(self._fold(key), w, rng)

    def update_folded(self, folded: int, w: int = 1, rng=None) -> None:
        """Like :meth:`update` for a key already passed through :meth:`fold_key`."""
        if w < 0:
            raise ParameterError(f"weight must be >= 0, got {w}")
        a = self._sampled_units(w, rng)
        if a == 0:
            return
        self.total_weight += a
        if self.ways is None:
            self._update_assoc(folded, a, rng)
        else:
            self._update_set(folded, a, rng)

    def _update_assoc(self, folded: int, a: int, rng) -> None:
        slot = self._slot_of.get(folded)
        if slot is not None:
            self._counts[slot] += a
            heapq.heappush(self._heap, (self._counts[slot], slot))
            return
        if self._next_free < self.capacity:
            slot = self._next_free
            self._next_free += 1
            self._admit(slot, folded, a)
            return
        m, victim = self._min_entry()
        if self.policy == "rap" and not rng.bernoulli(a / (m + a)):
            return
        del self._slot_of[self._keys[victim]]
        self._admit(victim, folded, m + a)

    def _admit(self, slot: int, folded: int, count: int) -> None:
        self._keys[slot] = folded
        self._counts[slot] = count
        self._slot_of[folded] = slot
        heapq.heappush(self._heap, (count, slot))

    def _min_entry(self) -> tuple[int, int]:
        # Lazy heap: drop stale (count, slot) pairs; ties resolve to the
        # lowest slot index by the tuple order.
        heap = self._heap
        while True:
            count, slot = heap[0]
            if self._counts[slot] == count:
                return count, slot
            heapq.heappop(heap)

    def _update_set(self, folded: int, a: int, rng) -> None:
        base = (mix64(folded ^ self._set_seed) % self._n_sets) * self.ways
        free = -1
        min_slot = -1
        min_count = -1
        for slot in range(base, base + self.ways):
            k = self._keys[slot]
            if k == folded:
                self._counts[slot] += a
                return
            if k is None:
                if free < 0:
                    free = slot
            elif min_slot < 0 or self._counts[slot] < min_count:
                min_slot = slot
                min_count = self._counts[slot]
        if free >= 0:
            self._keys[free] = folded
            self._counts[free] = a
            self._slot_of[folded] = free
            return
        if self.policy == "rap" and not rng.bernoulli(a / (min_count + a)):
            return
        del self._slot_of[self._keys[min_slot]]
        self._keys[min_slot] = folded
        self._counts[min_slot] = min_count + a
        self._slot_of[folded] = min_slot

    # -- queries ---------------------------------------------------------

    def _scale(self) -> float:
        return 1.0 / self.params.p if self.counter_mode == "aee" else 1.0

    def query(self, key: bytes) -> float:
        """Estimated weight for ``key``; unmonitored keys report 0 by default.

        With absent_returns_min=True an unmonitored key reports the minimal
        resident count instead (the classical overestimate).
        """
        return self.query_folded(self._fold(key))

    def query_folded(self, folded: int) -> float:
        slot = self._slot_of.get(folded)
        if slot is not None:
            return self._counts[slot] * self._scale()
        if not self.absent_returns_min:
            return 0.0
        resident = [self._counts[s] for s in range(self.capacity)
                    if self._keys[s] is not None]
        if not resident:
            return 0.0
        return min(resident) * self._scale()

    def resident(self) -> dict[int, float]:
        """Folded key -> estimate for every monitored entry."""
        return {self._keys[s]: self._counts[s] * self._scale()
                for s in range(self.capacity) if self._keys[s] is not None}

    def min_count(self) -> float:
        """Smallest resident estimate (0 when the cache is not full)."""
        resident = [self._counts[s] for s in range(self.capacity)
                    if self._keys[s] is not None]
        if len(resident) < self.capacity:
            return 0.0
        return min(resident) * self._scale()


# -- space accounting ------------------------------------------------------

def entry_footprint(key_mode: str = "full", counter_mode: str = "exact",
                    key_bits: int | None = None, counter_bits: int = 32) -> int:
    """Bytes per cache entry for a key/counter layout.

    Full identifiers cost the conventional 13 bytes; fingerprints cost
    ceil(key_bits/8). Counters cost ceil(counter_bits/8) whether exact or
    sampled (the mode only determines how wide they need to be).
    """
    if key_mode == "full":
        key_bytes = FULL_ID_BYTES
    elif key_mode == "fingerprint":
        if not key_bits:
            raise ParameterError("fingerprint footprint needs key_bits")
        key_bytes = math.ceil(key_bits / 8)
    else:
        raise ParameterError(f"unknown key mode: {key_mode!r}")
    if counter_mode not in ("exact", "aee"):
        raise ParameterError(f"unknown counter mode: {counter_mode!r}")
    return key_bytes + math.ceil(counter_bits / 8)


def cache_footprint_bytes(entries: int, per_entry_bytes: int,
                          heavy_capacity: int = 0,
                          index_bits: int | None = None) -> float:
    """Analytical total for a cache: entries plus the heavy extension table.

    Heavy entries are priced like the array accounting: index bits plus a
    2-bit table overhead each.
    """
    if index_bits is None:
        index_bits = max(1, math.ceil(math.log2(entries)))
    from .earray import HEAVY_OVERHEAD_BITS
    return entries * per_entry_bytes + heavy_capacity * (index_bits + HEAVY_OVERHEAD_BITS) / 8.0
