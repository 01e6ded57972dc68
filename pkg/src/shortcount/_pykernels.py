"""Pure-Python kernels: the reference twins of the compiled extension.

Every function here has a bit-for-bit identical counterpart in
``shortcount._ckernels``. Both sides draw from the same SplitMix64 stream in
the same order, so results are reproducible across backends and platforms.
The compiled module is the one you want for large runs; this module keeps the
package usable without a C toolchain and serves as the oracle in the
backend-equivalence tests.

Draw discipline (what one call consumes from the generator):

* ``uniform01``           - 1 word
* ``bernoulli(q)``        - 1 word for 0 < q < 1, none for q in {0, 1}
* ``binomial(n, 0.5)``    - ceil(n/64) words (popcount path)
* ``binomial(n, q)``      - n words for general q in (0, 1)
* ``geometric(p)``        - 1 word for p < 1, none for p = 1
* ``array_pi_run``        - 1 word per event (coin from the high bits,
                            slot from the low bits)
"""

from __future__ import annotations

import math

from .errors import ParameterError

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0**-53


class RngState:
    """Deterministic seedable generator (SplitMix64).

    Two instances built from the same seed produce identical sequences. Not
    cryptographic. Ownership is single-threaded; give each worker its own
    instance.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform01(self) -> float:
        """Uniform draw in [0, 1), 53 random bits."""
        return (self.next_u64() >> 11) * _INV53

    def bernoulli(self, q: float) -> bool:
        """True with probability q."""
        if not 0.0 <= q <= 1.0:
            raise ParameterError(f"bernoulli probability must be in [0, 1], got {q}")
        if q <= 0.0:
            return False
        if q >= 1.0:
            return True
        return self.uniform01() < q

    def binomial(self, n: int, q: float) -> int:
        """Number of successes in n independent trials of probability q.

        q = 1/2 uses a popcount of raw words, which is exact and fast; other
        probabilities fall back to n Bernoulli draws.
        """
        if n < 0:
            raise ParameterError(f"binomial count must be >= 0, got {n}")
        if not 0.0 <= q <= 1.0:
            raise ParameterError(f"binomial probability must be in [0, 1], got {q}")
        if n == 0 or q <= 0.0:
            return 0
        if q >= 1.0:
            return n
        if q == 0.5:
            k = 0
            full, rem = divmod(n, 64)
            for _ in range(full):
                k += self.next_u64().bit_count()
            if rem:
                k += (self.next_u64() & ((1 << rem) - 1)).bit_count()
            return k
        k = 0
        for _ in range(n):
            if self.uniform01() < q:
                k += 1
        return k

    def geometric(self, p: float) -> int:
        """Trials until (and including) the first success, Pr[G=x]=p(1-p)^(x-1).

        Inverse-transform: G = ceil(ln U / ln(1-p)), clamped to >= 1. p = 1
        short-circuits to 1 so callers can treat "sample everything" uniformly.
        """
        if not 0.0 < p <= 1.0:
            raise ParameterError(f"geometric probability must be in (0, 1], got {p}")
        if p >= 1.0:
            return 1
        u = self.uniform01()
        if u <= 0.0:
            u = _INV53
        g = int(math.ceil(math.log(u) / math.log1p(-p)))
        return g if g >= 1 else 1


def pi_run(rng, n: int, p: float, start: int = 0, cap: int = -1):
    """Apply n probabilistic increments to a register starting at `start`.

    Returns (final_value, overflow_events). With cap >= 0 the register
    saturates there and each blocked increment counts as one overflow event;
    cap < 0 means unbounded. One Bernoulli draw per event (none when p = 1).
    """
    value = start
    over = 0
    for _ in range(n):
        if rng.bernoulli(p):
            if value == cap:
                over += 1
            else:
                value += 1
    return value, over


def weighted_run(rng, weights, p: float) -> int:
    """Stream weighted adds into an unbounded register; return the raw value.

    Each weight w contributes floor(w*p) deterministically plus one with
    probability w*p - floor(w*p).
    """
    value = 0
    for w in weights:
        w = int(w)
        wp = w * p
        w1 = int(math.floor(wp))
        value += w1
        if rng.bernoulli(wp - w1):
            value += 1
    return value


def array_pi_run(rng, n_events: int, p: float, w_slots: int, threshold: int):
    """Drive n_events probabilistic increments into a w_slots-wide array.

    Slots are chosen uniformly (w_slots must be a power of two); a slot that
    reaches `threshold` wraps and carries one unit into its extension.
    Returns (total_successes, heavy_entries) where heavy_entries counts slots
    whose extension is nonzero. One raw word per event: the top 53 bits form
    the sampling coin, the low bits pick the slot.
    """
    if w_slots <= 0 or (w_slots & (w_slots - 1)) != 0:
        raise ParameterError(f"slot count must be a power of two, got {w_slots}")
    mask = w_slots - 1
    lows = [0] * w_slots
    exts = [0] * w_slots
    total = 0
    heavy = 0
    for _ in range(n_events):
        u = rng.next_u64()
        if (u >> 11) * _INV53 < p:
            total += 1
            slot = u & mask
            lows[slot] += 1
            if lows[slot] == threshold:
                lows[slot] = 0
                if exts[slot] == 0:
                    heavy += 1
                exts[slot] += 1
    return total, heavy


def single_dynamic_run(rng, n_adds: int, width_bits: int, maxspeed: bool,
                       deterministic: bool, n_prime: int):
    """Feed n_adds unit updates to one self-scaling register.

    maxspeed=False grows at p=1 until the register would pass 2^width_bits - 1,
    then halves value and p together (overflow-driven). maxspeed=True follows
    the count-driven schedule p = min(1, 2^-floor(log2(n/n_prime))) and pays
    for residuals through a shared geometric skip budget. `deterministic`
    selects floor-halving over binomial halving. Returns (raw_value, k) with
    p = 2^-k; the estimate is raw_value * 2^k.
    """
    value = 0
    k = 0
    cap = (1 << width_bits) - 1
    if not maxspeed:
        for _ in range(n_adds):
            w1 = 1 if k == 0 else 0
            while value >= cap + 1 - w1:
                value = (value >> 1) if deterministic else rng.binomial(value, 0.5)
                k += 1
                w1 = 0
            value += w1
            if k > 0:
                r = 0.5**k
                if rng.uniform01() < r:
                    if value == cap:
                        value = (value >> 1) if deterministic else rng.binomial(value, 0.5)
                        k += 1
                    value += 1
        return value, k
    n_seen = 0
    budget = 1
    for _ in range(n_adds):
        n_seen += 1
        q = n_seen // n_prime
        k_new = q.bit_length() - 1 if q > 0 else 0
        if k_new > k:
            for _ in range(k_new - k):
                value = (value >> 1) if deterministic else rng.binomial(value, 0.5)
            k = k_new
            budget = rng.geometric(0.5**k)
        if k == 0:
            value += 1
        elif budget == 1:
            value += 1
            budget = rng.geometric(0.5**k)
        else:
            budget -= 1
    return value, k
