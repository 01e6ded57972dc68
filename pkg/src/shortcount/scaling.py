"""Self-scaling counters for streams whose total is not known in advance.

Two controllers grow the counting range by halving the sampling probability
``p`` (always ``2^-k``) and shrinking every register in the owning structure
to match:

* max-accuracy: start at ``p = 1`` and halve only when a register would pass
  its bit-width, so the registers always use as much resolution as they can
  hold.
* max-speed: halve on a fixed schedule driven by the running total ``n``,
  ``p = min(1, 2^-floor(log2(n / n_prime)))``, and pay for residual units
  through a shared geometric skip budget so most updates touch nothing.

Register shrinking ("downsampling") is either deterministic, replacing the
value with floor(value/2), or probabilistic, replacing it with
Bin(value, 1/2). Deterministic is the default: it has lower variance in
practice, which the comparison test in the suite reproduces. A generation bit
per register lets large structures spread a halving across subsequent updates
(:func:`deamortized_sweep`) instead of paying for it all at once.

A halving must shrink *every* register the structure owns, not just the ones
mapped by the current update; structures hand the controller a ``halve_all``
callback for that. When no callback is given the controller halves exactly
the registers passed to the add call, which is correct for a single register
or a standalone array that passes all of its registers.
"""

from __future__ import annotations

from .errors import ParameterError
from .estimator import Estimator
from . import backend

__all__ = [
    "ScaleState",
    "max_accuracy_add",
    "max_speed_add",
    "skip_count",
    "downsample_deterministic",
    "downsample_probabilistic",
    "deamortized_sweep",
    "DeamortizedHalver",
    "DynamicEstimator",
]

MAX_ACCURACY = "max-accuracy"
MAX_SPEED = "max-speed"
DETERMINISTIC = "deterministic"
PROBABILISTIC = "probabilistic"


class ScaleState:
    """Shared scaling state for one structure: probability, totals, skip budget."""

    __slots__ = ("width_bits", "n_prime", "mode", "downsample_kind",
                 "k", "n_seen", "geo_budget", "halve_all")

    def __init__(self, width_bits: int, mode: str = MAX_ACCURACY,
                 n_prime: int | None = None,
                 downsample_kind: str = DETERMINISTIC,
                 halve_all=None):
        if mode not in (MAX_ACCURACY, MAX_SPEED):
            raise ParameterError(f"unknown mode: {mode!r}")
        if downsample_kind not in (DETERMINISTIC, PROBABILISTIC):
            raise ParameterError(f"unknown downsample kind: {downsample_kind!r}")
        if mode == MAX_SPEED and (n_prime is None or n_prime < 1):
            raise ParameterError("max-speed mode needs n_prime >= 1")
        self.width_bits = width_bits
        self.n_prime = n_prime
        self.mode = mode
        self.downsample_kind = downsample_kind
        self.k = 0
        self.n_seen = 0
        self.geo_budget = 1
        self.halve_all = halve_all

    @property
    def p(self) -> float:
        """Current sampling probability, 2^-k."""
        return 0.5 ** self.k

    @property
    def cap(self) -> int:
        return (1 << self.width_bits) - 1

    def schedule_k(self, n_seen: int) -> int:
        """Max-speed halving count for a running total: floor(log2(n/n_prime)), >= 0."""
        q = n_seen // self.n_prime
        return q.bit_length() - 1 if q > 0 else 0

    def estimate(self, raw: int) -> float:
        """Scale a raw register value back to stream units."""
        return raw * float(1 << self.k)

    def _halve(self, rng) -> None:
        # One halving step of the owning structure; p is adjusted by the caller.
        if self.halve_all is None:
            raise ParameterError(
                "halving requested but no registers attached; pass counters "
                "to the add call or set halve_all")
        self.halve_all(rng)


def downsample_deterministic(est: Estimator) -> None:
    """Halve a register in place: value -> floor(value/2), generation flipped."""
    est.value >>= 1
    est.generation = not est.generation


def downsample_probabilistic(est: Estimator, rng) -> None:
    """Halve a register in place: value -> Bin(value, 1/2), generation flipped."""
    est.value = rng.binomial(est.value, 0.5)
    est.generation = not est.generation


def _downsample(est: Estimator, kind: str, rng) -> None:
    if kind == DETERMINISTIC:
        downsample_deterministic(est)
    else:
        downsample_probabilistic(est, rng)


def _halve_each(counters, kind, rng):
    def halve(r):
        for c in counters:
            _downsample(c, kind, r)
    return halve


def max_accuracy_add(state: ScaleState, counters, w: int, rng) -> None:
    """Add weight ``w`` to the mapped registers, halving on overflow.

    ``counters`` is the update's register set (what the owning algorithm maps
    the item to). While the deterministic part floor(w*p) would push the
    largest mapped register past 2^width - 1, the whole structure is halved
    and p with it; the residual coin then lands with probability
    w*p - floor(w*p), halving again if it hits a full register mid-update.
    """
    if w < 0:
        raise ParameterError(f"weight must be >= 0, got {w}")
    counters = list(counters)
    halve = state.halve_all or _halve_each(counters, state.downsample_kind, rng)
    cap = state.cap
    k = state.k
    w1 = w >> k
    while counters and w1 > 0 and max(c.value for c in counters) >= cap + 1 - w1:
        halve(rng)
        state.k += 1
        k = state.k
        w1 = w >> k
    r = (w - (w1 << k)) * (0.5 ** k)
    for c in counters:
        c.value += w1
        if rng.bernoulli(r):
            if c.value == cap:
                halve(rng)
                state.k += 1
                k = state.k
                w1 = w >> k
                r = (w - (w1 << k)) * (0.5 ** k)
            c.value += 1
    state.n_seen += w


def max_speed_add(state: ScaleState, counters, w: int, rng) -> None:
    """Add weight ``w`` under the count-driven probability schedule.

    Updates the running total, drops p to 2^-floor(log2(n/n_prime)) when the
    schedule says so (halving all registers and redrawing the skip budget),
    then adds floor(w*p) to each mapped register and simulates the residual
    w - floor(w*p)/p unit coins through the shared geometric budget. Each
    mapped register sees the full residual exposure.
    """
    if w < 0:
        raise ParameterError(f"weight must be >= 0, got {w}")
    counters = list(counters)
    state.n_seen += w
    k_new = state.schedule_k(state.n_seen)
    if k_new > state.k:
        halve = state.halve_all or _halve_each(counters, state.downsample_kind, rng)
        for _ in range(k_new - state.k):
            halve(rng)
        state.k = k_new
        state.geo_budget = rng.geometric(0.5 ** k_new)
    k = state.k
    w1 = w >> k
    w2_full = w - (w1 << k)
    p = 0.5 ** k
    g = state.geo_budget
    for c in counters:
        c.value += w1
        w2 = w2_full
        while g <= w2:
            c.value += 1
            w2 -= g
            g = rng.geometric(p)
        g -= w2
    state.geo_budget = g


def skip_count(state: ScaleState, rng) -> int:
    """Current skip budget: unit events to pass before the next register touch.

    Callers decrement the budget once per event and process the event whose
    decrement reaches zero; the next call redraws it from Geo(p). At p = 1 the
    budget is always 1, so every event is processed.
    """
    if state.geo_budget < 1:
        state.geo_budget = rng.geometric(state.p)
    return state.geo_budget


def deamortized_sweep(counters, cursor: int, k: int, target_generation: bool,
                      kind: str = DETERMINISTIC, rng=None) -> int:
    """Advance a pending lazy halving over the next ``k`` register positions.

    Registers still on the old generation are halved and flipped; registers
    already at ``target_generation`` (halved early because they overflowed
    mid-epoch) are skipped so nothing is halved twice. Returns the new cursor.
    """
    end = min(cursor + k, len(counters))
    for i in range(cursor, end):
        c = counters[i]
        if c.generation != target_generation:
            _downsample(c, kind, rng)
    return end


class DeamortizedHalver:
    """Spreads structure-wide halvings over subsequent updates.

    ``announce()`` starts an epoch (flips the target generation);
    ``on_update()`` then sweeps ``rate`` registers per call until the epoch is
    done. ``resolve(i)`` brings one register current immediately, for the
    overflow-before-swept case.
    """

    def __init__(self, counters, rate: int | None = None,
                 kind: str = DETERMINISTIC, n_prime: int | None = None):
        if rate is None:
            # Default: finish a sweep within one epoch's minimum length.
            if n_prime is None or n_prime < 1:
                raise ParameterError("need a sweep rate or n_prime to derive one")
            rate = max(1, -(-len(counters) // n_prime))
        if rate < 1:
            raise ParameterError(f"sweep rate must be >= 1, got {rate}")
        self.counters = counters
        self.rate = rate
        self.kind = kind
        self.target = False
        self.cursor = len(counters)

    @property
    def sweeping(self) -> bool:
        return self.cursor < len(self.counters)

    def announce(self) -> None:
        if self.sweeping:
            raise ParameterError("previous halving epoch still sweeping")
        self.target = not self.target
        self.cursor = 0

    def on_update(self, rng=None) -> None:
        if self.sweeping:
            self.cursor = deamortized_sweep(self.counters, self.cursor,
                                            self.rate, self.target,
                                            self.kind, rng)

    def resolve(self, i: int, rng=None) -> None:
        c = self.counters[i]
        if self.sweeping and c.generation != self.target:
            _downsample(c, self.kind, rng)


class DynamicEstimator:
    """One self-scaling register: the single-counter face of the controllers."""

    def __init__(self, width_bits: int, mode: str = MAX_ACCURACY,
                 n_prime: int | None = None,
                 downsample_kind: str = DETERMINISTIC):
        self.register = Estimator(width_bits)
        self.state = ScaleState(width_bits, mode=mode, n_prime=n_prime,
                                downsample_kind=downsample_kind)

    def add(self, w: int, rng) -> None:
        if self.state.mode == MAX_ACCURACY:
            max_accuracy_add(self.state, (self.register,), w, rng)
        else:
            max_speed_add(self.state, (self.register,), w, rng)

    def query(self) -> float:
        return self.state.estimate(self.register.value)

    def run_units(self, n: int, rng) -> None:
        """Feed ``n`` unit adds through the streaming kernel (fresh state only)."""
        st = self.state
        if self.register.value != 0 or st.k != 0 or st.n_seen != 0:
            raise ParameterError("run_units requires a freshly created estimator")
        value, k = backend.kernels().single_dynamic_run(
            rng, n, st.width_bits, st.mode == MAX_SPEED,
            st.downsample_kind == DETERMINISTIC, st.n_prime or 1)
        self.register.value = value
        st.k = k
        st.n_seen = n
