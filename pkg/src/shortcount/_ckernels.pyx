# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: SplitMix64 generator plus the streaming drivers.

Bit-for-bit twins of ``shortcount._pykernels`` (see its docstring for the
draw discipline). The sketch drivers additionally mirror the per-update paths
in ``shortcount.sketch``, so running a trace through a kernel or through the
per-update methods with equal seeds produces identical tables; the backend
tests pin this.
"""

import numpy as np

from libc.math cimport ceil as c_ceil
from libc.math cimport floor as c_floor
from libc.math cimport ldexp as c_ldexp
from libc.math cimport log as c_log
from libc.math cimport log1p as c_log1p

from .errors import ParameterError

cdef extern from *:
    """
    static inline int sc_popcount64(unsigned long long x) {
        return (int)__builtin_popcountll(x);
    }
    static inline int sc_bitlen64(unsigned long long x) {
        return x ? 64 - __builtin_clzll(x) : 0;
    }
    """
    int sc_popcount64(unsigned long long x) nogil
    int sc_bitlen64(unsigned long long x) nogil

cdef unsigned long long _GAMMA = <unsigned long long>0x9E3779B97F4A7C15
cdef unsigned long long _MIX1 = <unsigned long long>0xBF58476D1CE4E5B9
cdef unsigned long long _MIX2 = <unsigned long long>0x94D049BB133111EB
cdef double _INV53 = 1.0 / 9007199254740992.0

MAX_DEPTH = 64


cdef inline unsigned long long _mix64(unsigned long long x) nogil:
    x = (x ^ (x >> 30)) * _MIX1
    x = (x ^ (x >> 27)) * _MIX2
    return x ^ (x >> 31)


cdef class RngState:
    """Deterministic seedable generator (SplitMix64); compiled twin."""

    cdef unsigned long long state

    def __init__(self, seed):
        self.state = <unsigned long long>(int(seed) & 0xFFFFFFFFFFFFFFFF)

    cdef inline unsigned long long _next(self) nogil:
        self.state += _GAMMA
        cdef unsigned long long z = self.state
        z = (z ^ (z >> 30)) * _MIX1
        z = (z ^ (z >> 27)) * _MIX2
        return z ^ (z >> 31)

    cdef inline double _uniform(self) nogil:
        return <double>(self._next() >> 11) * _INV53

    cdef inline bint _bern(self, double q) nogil:
        # q validated by the caller; draws one word iff 0 < q < 1
        if q <= 0.0:
            return 0
        if q >= 1.0:
            return 1
        return self._uniform() < q

    cdef long long _binom(self, long long n, double q) nogil:
        cdef long long k = 0, full, rem, i
        if n == 0 or q <= 0.0:
            return 0
        if q >= 1.0:
            return n
        if q == 0.5:
            full = n >> 6
            rem = n & 63
            for i in range(full):
                k += sc_popcount64(self._next())
            if rem:
                k += sc_popcount64(self._next() & ((<unsigned long long>1 << rem) - 1))
            return k
        for i in range(n):
            if self._uniform() < q:
                k += 1
        return k

    cdef inline long long _geom(self, double p) nogil:
        cdef double u
        cdef long long g
        if p >= 1.0:
            return 1
        u = self._uniform()
        if u <= 0.0:
            u = _INV53
        g = <long long>c_ceil(c_log(u) / c_log1p(-p))
        return g if g >= 1 else 1

    def next_u64(self):
        return self._next()

    def uniform01(self):
        return self._uniform()

    def bernoulli(self, double q):
        if not 0.0 <= q <= 1.0:
            raise ParameterError(f"bernoulli probability must be in [0, 1], got {q}")
        return bool(self._bern(q))

    def binomial(self, long long n, double q):
        if n < 0:
            raise ParameterError(f"binomial count must be >= 0, got {n}")
        if not 0.0 <= q <= 1.0:
            raise ParameterError(f"binomial probability must be in [0, 1], got {q}")
        return self._binom(n, q)

    def geometric(self, double p):
        if not 0.0 < p <= 1.0:
            raise ParameterError(f"geometric probability must be in (0, 1], got {p}")
        return self._geom(p)


def pi_run(RngState rng, long long n, double p, long long start=0, long long cap=-1):
    """Compiled twin of ``_pykernels.pi_run``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability must be in [0, 1], got {p}")
    cdef long long value = start, over = 0, i
    for i in range(n):
        if rng._bern(p):
            if value == cap:
                over += 1
            else:
                value += 1
    return value, over


def weighted_run(RngState rng, long long[::1] weights, double p):
    """Compiled twin of ``_pykernels.weighted_run``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability must be in [0, 1], got {p}")
    cdef long long value = 0, w1, i
    cdef double wp
    for i in range(weights.shape[0]):
        wp = <double>weights[i] * p
        w1 = <long long>c_floor(wp)
        value += w1
        if rng._bern(wp - w1):
            value += 1
    return value


def array_pi_run(RngState rng, long long n_events, double p, long long w_slots,
                 long long threshold):
    """Compiled twin of ``_pykernels.array_pi_run``."""
    if w_slots <= 0 or (w_slots & (w_slots - 1)) != 0:
        raise ParameterError(f"slot count must be a power of two, got {w_slots}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability must be in [0, 1], got {p}")
    lows_arr = np.zeros(w_slots, dtype=np.int64)
    exts_arr = np.zeros(w_slots, dtype=np.int64)
    cdef long long[::1] lows = lows_arr
    cdef long long[::1] exts = exts_arr
    cdef unsigned long long u, mask = <unsigned long long>(w_slots - 1)
    cdef long long total = 0, heavy = 0, slot, i
    for i in range(n_events):
        u = rng._next()
        if <double>(u >> 11) * _INV53 < p:
            total += 1
            slot = <long long>(u & mask)
            lows[slot] += 1
            if lows[slot] == threshold:
                lows[slot] = 0
                if exts[slot] == 0:
                    heavy += 1
                exts[slot] += 1
    return total, heavy


def single_dynamic_run(RngState rng, long long n_adds, int width_bits,
                       bint maxspeed, bint deterministic, long long n_prime):
    """Compiled twin of ``_pykernels.single_dynamic_run``."""
    cdef long long value = 0, n_seen = 0, budget = 1, q, i
    cdef int k = 0, k_new, d
    cdef long long cap = (<long long>1 << width_bits) - 1
    cdef long long w1
    cdef double r
    if not maxspeed:
        for i in range(n_adds):
            w1 = 1 if k == 0 else 0
            while value >= cap + 1 - w1:
                value = value >> 1 if deterministic else rng._binom(value, 0.5)
                k += 1
                w1 = 0
            value += w1
            if k > 0:
                r = c_ldexp(1.0, -k)
                if rng._uniform() < r:
                    if value == cap:
                        value = value >> 1 if deterministic else rng._binom(value, 0.5)
                        k += 1
                    value += 1
        return value, k
    for i in range(n_adds):
        n_seen += 1
        q = n_seen // n_prime
        k_new = sc_bitlen64(<unsigned long long>q) - 1 if q > 0 else 0
        if k_new > k:
            for d in range(k_new - k):
                value = value >> 1 if deterministic else rng._binom(value, 0.5)
            k = k_new
            budget = rng._geom(c_ldexp(1.0, -k))
        if k == 0:
            value += 1
        elif budget == 1:
            value += 1
            budget = rng._geom(c_ldexp(1.0, -k))
        else:
            budget -= 1
    return value, k


# -- sketch drivers ---------------------------------------------------------

def sketch_run_exact(unsigned long long[::1] keys, long long[::1] weights,
                     long long[:, ::1] rows, unsigned long long[::1] seeds,
                     bint conservative):
    """Stream a trace through exact-counter rows; returns hash evaluations."""
    cdef Py_ssize_t n = keys.shape[0]
    cdef int d = <int>rows.shape[0]
    cdef unsigned long long width = <unsigned long long>rows.shape[1]
    if d > 64:
        raise ParameterError("depth > 64 unsupported by the kernel")
    cdef Py_ssize_t idxs[64]
    cdef long long vals[64]
    cdef long long evals = 0, w, mn
    cdef Py_ssize_t i
    cdef int j
    for i in range(n):
        w = weights[i]
        for j in range(d):
            idxs[j] = <Py_ssize_t>(_mix64(keys[i] ^ seeds[j]) % width)
        evals += d
        if conservative:
            mn = rows[0, idxs[0]]
            for j in range(d):
                vals[j] = rows[j, idxs[j]]
                if vals[j] < mn:
                    mn = vals[j]
            for j in range(d):
                if vals[j] == mn:
                    rows[j, idxs[j]] += w
        else:
            for j in range(d):
                rows[j, idxs[j]] += w
    return evals


def sketch_run_aee(RngState rng, unsigned long long[::1] keys,
                   long long[::1] weights, long long[:, ::1] lows,
                   long long[:, ::1] exts, unsigned long long[::1] seeds,
                   bint conservative, double p, long long threshold):
    """Stream a trace through fixed-p sampled rows; returns hash evaluations."""
    cdef Py_ssize_t n = keys.shape[0]
    cdef int d = <int>lows.shape[0]
    cdef unsigned long long width = <unsigned long long>lows.shape[1]
    if d > 64:
        raise ParameterError("depth > 64 unsupported by the kernel")
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"probability must be in (0, 1], got {p}")
    cdef Py_ssize_t idxs[64]
    cdef long long raws[64]
    cdef long long evals = 0, w, w1, inc, mn, low
    cdef double wp
    cdef Py_ssize_t i
    cdef int j
    for i in range(n):
        w = weights[i]
        wp = <double>w * p
        w1 = <long long>c_floor(wp)
        inc = w1 + (1 if rng._bern(wp - w1) else 0)
        if inc == 0:
            continue
        for j in range(d):
            idxs[j] = <Py_ssize_t>(_mix64(keys[i] ^ seeds[j]) % width)
        evals += d
        if conservative:
            mn = lows[0, idxs[0]] + threshold * exts[0, idxs[0]]
            for j in range(d):
                raws[j] = lows[j, idxs[j]] + threshold * exts[j, idxs[j]]
                if raws[j] < mn:
                    mn = raws[j]
            for j in range(d):
                if raws[j] == mn:
                    low = lows[j, idxs[j]] + inc
                    if low >= threshold:
                        exts[j, idxs[j]] += low / threshold
                        low = low % threshold
                    lows[j, idxs[j]] = low
        else:
            for j in range(d):
                low = lows[j, idxs[j]] + inc
                if low >= threshold:
                    exts[j, idxs[j]] += low / threshold
                    low = low % threshold
                lows[j, idxs[j]] = low
    return evals


cdef inline void _halve_rows(long long[:, ::1] rows, bint deterministic,
                             RngState rng) nogil:
    cdef Py_ssize_t j, c
    for j in range(rows.shape[0]):
        for c in range(rows.shape[1]):
            if deterministic:
                rows[j, c] = rows[j, c] >> 1
            else:
                rows[j, c] = rng._binom(rows[j, c], 0.5)


cdef inline void _min_members(long long[:, ::1] rows, Py_ssize_t *idxs,
                              int d, long long *vals, bint *member) nogil:
    cdef long long mn
    cdef int j
    mn = rows[0, idxs[0]]
    for j in range(d):
        vals[j] = rows[j, idxs[j]]
        if vals[j] < mn:
            mn = vals[j]
    for j in range(d):
        member[j] = vals[j] == mn


def sketch_run_dynamic(RngState rng, unsigned long long[::1] keys,
                       long long[::1] weights, long long[:, ::1] rows,
                       unsigned long long[::1] seeds, bint conservative,
                       bint maxspeed, bint deterministic, long long n_prime,
                       int width_bits, int k0, long long n_seen0, long long g0):
    """Stream a trace through self-scaling rows.

    Returns (hash_evals, k, n_seen, geo_budget) so the owning sketch can
    resume where the kernel left off.
    """
    cdef Py_ssize_t n = keys.shape[0]
    cdef int d = <int>rows.shape[0]
    cdef unsigned long long width = <unsigned long long>rows.shape[1]
    if d > 64:
        raise ParameterError("depth > 64 unsupported by the kernel")
    cdef Py_ssize_t idxs[64]
    cdef long long vals[64]
    cdef bint member[64]
    cdef long long cap = (<long long>1 << width_bits) - 1
    cdef long long evals = 0, w, w1, w2, w2_full, g = g0, n_seen = n_seen0
    cdef long long mx, q
    cdef int k = k0, k_new, j, hsteps
    cdef double r, p
    cdef Py_ssize_t i, idx
    for i in range(n):
        w = weights[i]
        if maxspeed:
            n_seen += w
            q = n_seen // n_prime
            k_new = sc_bitlen64(<unsigned long long>q) - 1 if q > 0 else 0
            if k_new > k:
                for hsteps in range(k_new - k):
                    _halve_rows(rows, deterministic, rng)
                k = k_new
                g = rng._geom(c_ldexp(1.0, -k))
            w1 = w >> k
            w2_full = w - (w1 << k)
            p = c_ldexp(1.0, -k)
            if conservative:
                for j in range(d):
                    idxs[j] = <Py_ssize_t>(_mix64(keys[i] ^ seeds[j]) % width)
                evals += d
                _min_members(rows, idxs, d, vals, member)
                for j in range(d):
                    if member[j]:
                        rows[j, idxs[j]] += w1
                        w2 = w2_full
                        while g <= w2:
                            rows[j, idxs[j]] += 1
                            w2 -= g
                            g = rng._geom(p)
                        g -= w2
            else:
                for j in range(d):
                    idx = -1
                    if w1 > 0:
                        idx = <Py_ssize_t>(_mix64(keys[i] ^ seeds[j]) % width)
                        evals += 1
                        rows[j, idx] += w1
                    w2 = w2_full
                    while g <= w2:
                        if idx < 0:
                            idx = <Py_ssize_t>(_mix64(keys[i] ^ seeds[j]) % width)
                            evals += 1
                        rows[j, idx] += 1
                        w2 -= g
                        g = rng._geom(p)
                    g -= w2
        else:
            w1 = w >> k
            if conservative or w1 > 0:
                for j in range(d):
                    idxs[j] = <Py_ssize_t>(_mix64(keys[i] ^ seeds[j]) % width)
                evals += d
                if conservative:
                    _min_members(rows, idxs, d, vals, member)
                else:
                    for j in range(d):
                        member[j] = 1
                while w1 > 0:
                    mx = -1
                    for j in range(d):
                        if member[j] and rows[j, idxs[j]] > mx:
                            mx = rows[j, idxs[j]]
                    if mx < cap + 1 - w1:
                        break
                    _halve_rows(rows, deterministic, rng)
                    k += 1
                    w1 = w >> k
                r = <double>(w - (w1 << k)) * c_ldexp(1.0, -k)
                for j in range(d):
                    if not member[j]:
                        continue
                    rows[j, idxs[j]] += w1
                    if rng._bern(r):
                        if rows[j, idxs[j]] == cap:
                            _halve_rows(rows, deterministic, rng)
                            k += 1
                            w1 = w >> k
                            r = <double>(w - (w1 << k)) * c_ldexp(1.0, -k)
                        rows[j, idxs[j]] += 1
            else:
                r = <double>w * c_ldexp(1.0, -k)
                for j in range(d):
                    if rng._bern(r):
                        idx = <Py_ssize_t>(_mix64(keys[i] ^ seeds[j]) % width)
                        evals += 1
                        if rows[j, idx] == cap:
                            _halve_rows(rows, deterministic, rng)
                            k += 1
                            r = <double>w * c_ldexp(1.0, -k)
                        rows[j, idx] += 1
            n_seen += w
    return evals, k, n_seen, g
