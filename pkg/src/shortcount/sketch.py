"""Count-min and conservative-update sketches over exact or sampled counters.

A sketch keeps ``depth`` rows of ``width`` counters; each row maps a flow key
through its own seeded hash. Updates touch one counter per row (conservative
update touches only the rows whose mapped counter is minimal); queries take
the minimum over the mapped counters, which never underestimates with exact
counters.

Counter modes:

* ``exact``        - plain integer counters.
* ``aee``          - short sampled registers sharing one fixed probability
                     ``p`` with per-row threshold/extension slots. The
                     sampling decision is taken *before* any hashing, so
                     skipped packets cost no hash work at all.
* ``aee-maxacc``   - self-scaling registers that halve ``p`` on overflow.
* ``aee-maxspeed`` - self-scaling registers on the count-driven schedule with
                     a shared geometric skip budget.

The sketch's own collision error adds e/width (with failure probability
e^-depth) on top of whatever the counters contribute; ``error_budget``
composes the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .earray import HEAVY_OVERHEAD_BITS, choose_threshold, oversampling_bound
from .errors import ParameterError
from .estimator import SamplingParams
from .hashing import derive_seed, fnv1a64, mix64, mix64_np
from .scaling import DETERMINISTIC, PROBABILISTIC

__all__ = ["Sketch", "ErrorBudget", "error_budget"]

MODES = ("exact", "aee", "aee-maxacc", "aee-maxspeed")


@dataclass(frozen=True)
class ErrorBudget:
    """Additive error composition of counter sampling plus sketch collisions."""

    epsilon: float        # counter contribution
    eps_array: float      # collision contribution, e / width
    delta_rows: float     # depth * delta: any row's counters out of budget
    delta_array: float    # e^-depth: collision bound fails
    eps_total: float
    delta_total: float


def error_budget(d: int, w: int, eps: float, delta: float) -> ErrorBudget:
    """Compose the total guarantee for a d x w sketch over (eps, delta) counters.

    eps = 0 describes a plain exact-counter sketch (collision error only).
    """
    if d < 1 or w < 1:
        raise ParameterError(f"depth and width must be >= 1, got {d}, {w}")
    if not 0.0 <= eps < 1.0 or not 0.0 <= delta < 1.0:
        raise ParameterError("eps and delta must be in [0, 1)")
    eps_array = math.e / w
    delta_array = math.exp(-d)
    return ErrorBudget(epsilon=eps, eps_array=eps_array,
                       delta_rows=d * delta, delta_array=delta_array,
                       eps_total=eps + eps_array,
                       delta_total=d * delta + delta_array)


class Sketch:
    """A depth x width counter sketch; see the module docstring for modes."""

    def __init__(self, depth: int, width: int, mode: str = "exact",
                 conservative: bool = False, params: SamplingParams | None = None,
                 exact_bits: int = 32, width_bits: int = 16,
                 delta_o: float = 2e-15, threshold: int | None = None,
                 downsample_kind: str = DETERMINISTIC, seed: int = 0):
        if depth < 1 or width < 1:
            raise ParameterError(f"depth and width must be >= 1, got {depth}, {width}")
        if mode not in MODES:
            raise ParameterError(f"unknown mode: {mode!r}")
        if mode != "exact" and params is None:
            raise ParameterError(f"mode {mode!r} needs SamplingParams")
        if downsample_kind not in (DETERMINISTIC, PROBABILISTIC):
            raise ParameterError(f"unknown downsample kind: {downsample_kind!r}")
        self.depth = depth
        self.width = width
        self.mode = mode
        self.conservative = conservative
        self.params = params
        self.exact_bits = exact_bits
        self.seed = seed
        self.downsample_kind = downsample_kind
        self.hash_evals = 0
        self._seeds = [derive_seed(seed, j) for j in range(depth)]
        assert len(set(self._seeds)) == depth
        self._seeds_np = np.array(self._seeds, dtype=np.uint64)
        if mode == "exact":
            self.rows = np.zeros((depth, width), dtype=np.int64)
        elif mode == "aee":
            if threshold is None:
                threshold = choose_threshold(width, params, delta_o)
            self.threshold = threshold
            self.delta_o = delta_o
            self.lows = np.zeros((depth, width), dtype=np.int64)
            self.exts = np.zeros((depth, width), dtype=np.int64)
        else:
            # Self-scaling registers; max-speed needs one extra bit of headroom
            # over the fixed-p register width.
            self.width_bits = width_bits
            self.rows = np.zeros((depth, width), dtype=np.int64)
            self.scale_k = 0
            self.n_seen = 0
            self.geo_budget = 1

    # -- hashing ---------------------------------------------------------

    def _index(self, key64: int, j: int) -> int:
        return mix64(key64 ^ self._seeds[j]) % self.width

    # -- updates ---------------------------------------------------------

    def update(self, key: bytes, w: int = 1, rng=None) -> None:
        """Count ``w`` units for ``key`` (bytes are hashed verbatim)."""
        self.update_u64(fnv1a64(key), w, rng)

    def update_u64(self, key64: int, w: int = 1, rng=None) -> None:
        """Like :meth:`update` for a pre-folded 64-bit key."""
        if w < 0:
            raise ParameterError(f"weight must be >= 0, got {w}")
        if self.mode == "exact":
            self._update_exact(key64, w)
        elif self.mode == "aee":
            self._update_aee(key64, w, rng)
        elif self.mode == "aee-maxacc":
            self._update_maxacc(key64, w, rng)
        else:
            self._update_maxspeed(key64, w, rng)

    def _mapped(self, key64: int):
        self.hash_evals += self.depth
        return [self._index(key64, j) for j in range(self.depth)]

    def _update_exact(self, key64: int, w: int) -> None:
        idxs = self._mapped(key64)
        rows = self.rows
        if self.conservative:
            vals = [int(rows[j, idxs[j]]) for j in range(self.depth)]
            mn = min(vals)
            for j in range(self.depth):
                if vals[j] == mn:
                    rows[j, idxs[j]] += w
        else:
            for j in range(self.depth):
                rows[j, idxs[j]] += w

    def _bump_slot(self, j: int, idx: int, inc: int) -> None:
        low = int(self.lows[j, idx]) + inc
        if low >= self.threshold:
            carry, low = divmod(low, self.threshold)
            self.exts[j, idx] += carry
        self.lows[j, idx] = low

    def _update_aee(self, key64: int, w: int, rng) -> None:
        # Sampling decision first: unsampled packets never touch a hash.
        p = self.params.p
        wp = w * p
        w1 = int(math.floor(wp))
        inc = w1 + (1 if rng.bernoulli(wp - w1) else 0)
        if inc == 0:
            return
        idxs = self._mapped(key64)
        if self.conservative:
            raws = [self._raw(j, idxs[j]) for j in range(self.depth)]
            mn = min(raws)
            for j in range(self.depth):
                if raws[j] == mn:
                    self._bump_slot(j, idxs[j], inc)
        else:
            for j in range(self.depth):
                self._bump_slot(j, idxs[j], inc)

    def _halve_all(self, rng) -> None:
        if self.downsample_kind == DETERMINISTIC:
            self.rows >>= 1
        else:
            flat = self.rows.reshape(-1)
            for i in range(flat.shape[0]):
                flat[i] = rng.binomial(int(flat[i]), 0.5)

    def _update_maxacc(self, key64: int, w: int, rng) -> None:
        rows = self.rows
        cap = (1 << self.width_bits) - 1
        k = self.scale_k
        w1 = w >> k
        if self.conservative or w1 > 0:
            idxs = self._mapped(key64)
            if self.conservative:
                vals = [int(rows[j, idxs[j]]) for j in range(self.depth)]
                mn = min(vals)
                members = [j for j in range(self.depth) if vals[j] == mn]
            else:
                members = list(range(self.depth))
            while w1 > 0 and max(int(rows[j, idxs[j]]) for j in members) >= cap + 1 - w1:
                self._halve_all(rng)
                self.scale_k += 1
                k = self.scale_k
                w1 = w >> k
            r = (w - (w1 << k)) * (0.5 ** k)
            for j in members:
                rows[j, idxs[j]] += w1
                if rng.bernoulli(r):
                    if rows[j, idxs[j]] == cap:
                        self._halve_all(rng)
                        self.scale_k += 1
                        k = self.scale_k
                        w1 = w >> k
                        r = (w - (w1 << k)) * (0.5 ** k)
                    rows[j, idxs[j]] += 1
        else:
            # w1 == 0: hash a row only when its coin lands.
            r = w * (0.5 ** k)
            for j in range(self.depth):
                if rng.bernoulli(r):
                    idx = self._index(key64, j)
                    self.hash_evals += 1
                    if rows[j, idx] == cap:
                        self._halve_all(rng)
                        self.scale_k += 1
                        k = self.scale_k
                        r = w * (0.5 ** k)
                    rows[j, idx] += 1
        self.n_seen += w

    def _update_maxspeed(self, key64: int, w: int, rng) -> None:
        rows = self.rows
        self.n_seen += w
        q = self.n_seen // self.params.n_prime
        k_new = q.bit_length() - 1 if q > 0 else 0
        if k_new > self.scale_k:
            for _ in range(k_new - self.scale_k):
                self._halve_all(rng)
            self.scale_k = k_new
            self.geo_budget = rng.geometric(0.5 ** k_new)
        k = self.scale_k
        w1 = w >> k
        w2_full = w - (w1 << k)
        p = 0.5 ** k
        g = self.geo_budget
        if self.conservative:
            idxs = self._mapped(key64)
            vals = [int(rows[j, idxs[j]]) for j in range(self.depth)]
            mn = min(vals)
            members = [j for j in range(self.depth) if vals[j] == mn]
            for j in members:
                rows[j, idxs[j]] += w1
                w2 = w2_full
                while g <= w2:
                    rows[j, idxs[j]] += 1
                    w2 -= g
                    g = rng.geometric(p)
                g -= w2
        else:
            for j in range(self.depth):
                idx = -1
                if w1 > 0:
                    idx = self._index(key64, j)
                    self.hash_evals += 1
                    rows[j, idx] += w1
                w2 = w2_full
                while g <= w2:
                    if idx < 0:
                        idx = self._index(key64, j)
                        self.hash_evals += 1
                    rows[j, idx] += 1
                    w2 -= g
                    g = rng.geometric(p)
                g -= w2
        self.geo_budget = g

    # -- queries ---------------------------------------------------------

    def _raw(self, j: int, idx: int) -> int:
        return int(self.lows[j, idx]) + self.threshold * int(self.exts[j, idx])

    def query(self, key: bytes) -> float:
        """Estimated total weight for ``key``."""
        return self.query_u64(fnv1a64(key))

    def query_u64(self, key64: int) -> float:
        idxs = [self._index(key64, j) for j in range(self.depth)]
        if self.mode == "exact":
            return float(min(int(self.rows[j, idxs[j]]) for j in range(self.depth)))
        if self.mode == "aee":
            raw = min(self._raw(j, idxs[j]) for j in range(self.depth))
            return raw / self.params.p
        raw = min(int(self.rows[j, idxs[j]]) for j in range(self.depth))
        return raw * float(1 << self.scale_k)

    def query_many(self, keys64: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`query_u64` over an array of folded keys."""
        keys64 = np.ascontiguousarray(keys64, dtype=np.uint64)
        best = None
        for j in range(self.depth):
            idx = (mix64_np(keys64 ^ self._seeds_np[j]) % np.uint64(self.width)).astype(np.int64)
            if self.mode == "aee":
                vals = self.lows[j, idx] + self.threshold * self.exts[j, idx]
            else:
                vals = self.rows[j, idx]
            best = vals if best is None else np.minimum(best, vals)
        if self.mode == "aee":
            return best / self.params.p
        if self.mode == "exact":
            return best.astype(np.float64)
        return best * float(1 << self.scale_k)

    # -- streaming -------------------------------------------------------

    def run_stream(self, keys64: np.ndarray, weights: np.ndarray | None = None,
                   rng=None) -> int:
        """Feed a whole trace (folded keys, optional weights) through the sketch.

        Uses the compiled kernels when available; otherwise loops over the
        per-update path. Returns the number of hash evaluations spent.
        """
        keys64 = np.ascontiguousarray(keys64, dtype=np.uint64)
        if weights is None:
            weights = np.ones(keys64.shape[0], dtype=np.int64)
        else:
            weights = np.ascontiguousarray(weights, dtype=np.int64)
        kern = backend.kernels()
        before = self.hash_evals
        if hasattr(kern, "sketch_run_exact"):
            if self.mode == "exact":
                evals = kern.sketch_run_exact(keys64, weights, self.rows,
                                              self._seeds_np, self.conservative)
            elif self.mode == "aee":
                evals = kern.sketch_run_aee(rng, keys64, weights, self.lows,
                                            self.exts, self._seeds_np,
                                            self.conservative, self.params.p,
                                            self.threshold)
            else:
                evals, k, n_seen, g = kern.sketch_run_dynamic(
                    rng, keys64, weights, self.rows, self._seeds_np,
                    self.conservative, self.mode == "aee-maxspeed",
                    self.downsample_kind == DETERMINISTIC,
                    self.params.n_prime, self.width_bits,
                    self.scale_k, self.n_seen, self.geo_budget)
                self.scale_k, self.n_seen, self.geo_budget = k, n_seen, g
            self.hash_evals += evals
            return self.hash_evals - before
        klist = keys64.tolist()
        wlist = weights.tolist()
        for key64, w in zip(klist, wlist):
            self.update_u64(key64, w, rng)
        return self.hash_evals - before

    # -- accounting ------------------------------------------------------

    def memory_analytical_bytes(self) -> float:
        """Counter storage the configuration promises, in bytes."""
        if self.mode == "exact":
            return self.depth * self.width * self.exact_bits / 8.0
        if self.mode == "aee":
            slot_bits = max(1, math.ceil(math.log2(self.threshold)))
            index_bits = max(1, math.ceil(math.log2(self.width)))
            cap = int(oversampling_bound(self.params.n_prime, self.delta_o)
                      // self.threshold)
            per_row = self.width * slot_bits + cap * (index_bits + HEAVY_OVERHEAD_BITS)
            return self.depth * per_row / 8.0
        return self.depth * self.width * self.width_bits / 8.0

    def memory_actual_bytes(self) -> int:
        """Storage of this packed layout at its current fill."""
        if self.mode == "exact":
            return self.depth * self.width * math.ceil(self.exact_bits / 8)
        if self.mode == "aee":
            slot_bits = max(1, math.ceil(math.log2(self.threshold)))
            index_bits = max(1, math.ceil(math.log2(self.width)))
            heavy_entries = int(np.count_nonzero(self.exts))
            entry = math.ceil(index_bits / 8) + 1
            return (self.depth * self.width * math.ceil(slot_bits / 8)
                    + heavy_entries * entry)
        return self.depth * self.width * math.ceil(self.width_bits / 8)
