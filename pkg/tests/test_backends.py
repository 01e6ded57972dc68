"""Pure-Python and compiled kernels must be interchangeable bit for bit."""

import numpy as np
import pytest

from shortcount import Sketch, backend, derive_params
from shortcount import _pykernels as pk
from shortcount.hashing import mix64, mix64_np

ck = pytest.importorskip("shortcount._ckernels")


def test_generator_streams_match():
    a, b = pk.RngState(123456789), ck.RngState(123456789)
    assert [a.next_u64() for _ in range(1000)] == [b.next_u64() for _ in range(1000)]
    a, b = pk.RngState(5), ck.RngState(5)
    assert [a.uniform01() for _ in range(1000)] == [b.uniform01() for _ in range(1000)]


def test_sampler_draws_match():
    a, b = pk.RngState(7), ck.RngState(7)
    for q in (0.0, 1.0, 0.25, 0.5, 0.9):
        assert [a.bernoulli(q) for _ in range(50)] == [b.bernoulli(q) for _ in range(50)]
    a, b = pk.RngState(8), ck.RngState(8)
    for n, q in ((0, 0.5), (1, 0.5), (64, 0.5), (65, 0.5), (1000, 0.5), (30, 0.3)):
        assert a.binomial(n, q) == b.binomial(n, q)
    a, b = pk.RngState(9), ck.RngState(9)
    for p in (1.0, 0.5, 0.1, 0.001):
        assert [a.geometric(p) for _ in range(200)] == [b.geometric(p) for _ in range(200)]


def test_driver_outputs_match():
    assert (pk.pi_run(pk.RngState(1), 50_000, 0.123, start=3, cap=6000)
            == ck.pi_run(ck.RngState(1), 50_000, 0.123, start=3, cap=6000))
    weights = np.arange(1, 3001, dtype=np.int64)
    assert (pk.weighted_run(pk.RngState(2), weights, 0.37)
            == ck.weighted_run(ck.RngState(2), weights, 0.37))
    assert (pk.array_pi_run(pk.RngState(3), 80_000, 0.2, 128, 64)
            == ck.array_pi_run(ck.RngState(3), 80_000, 0.2, 128, 64))


@pytest.mark.parametrize("maxspeed", [False, True])
@pytest.mark.parametrize("deterministic", [False, True])
def test_single_dynamic_run_matches(maxspeed, deterministic):
    got_p = pk.single_dynamic_run(pk.RngState(4), 300_000, 8, maxspeed,
                                  deterministic, 1024)
    got_c = ck.single_dynamic_run(ck.RngState(4), 300_000, 8, maxspeed,
                                  deterministic, 1024)
    assert got_p == got_c


def test_mix64_vectorized_matches_scalar():
    xs = np.random.Generator(np.random.PCG64(0)).integers(
        0, 2**64, size=500, dtype=np.uint64)
    vec = mix64_np(xs)
    for x, m in zip(xs.tolist(), vec.tolist()):
        assert mix64(x) == m


@pytest.mark.parametrize("mode", ["exact", "aee", "aee-maxacc", "aee-maxspeed"])
@pytest.mark.parametrize("conservative", [False, True])
def test_sketch_stream_matches_per_update(mode, conservative):
    # The compiled trace drivers must reproduce the per-update path exactly:
    # same tables, same hash-evaluation count, same scale state.
    params = derive_params(0.05, 0.05, 30_000)
    gen = np.random.Generator(np.random.PCG64(21))
    keys = gen.integers(0, 2**64, size=15_000, dtype=np.uint64)
    weights = gen.integers(1, 40, size=15_000).astype(np.int64)

    def build():
        return Sketch(3, 64, mode=mode, conservative=conservative,
                      params=None if mode == "exact" else params,
                      width_bits=9, seed=77)

    fast = build()
    fast.run_stream(keys, weights, ck.RngState(31337))
    slow = build()
    rng = ck.RngState(31337)
    for key, w in zip(keys.tolist(), weights.tolist()):
        slow.update_u64(key, w, rng)
    if mode == "aee":
        assert np.array_equal(fast.lows, slow.lows)
        assert np.array_equal(fast.exts, slow.exts)
    else:
        assert np.array_equal(fast.rows, slow.rows)
    assert fast.hash_evals == slow.hash_evals
    if mode.startswith("aee-max"):
        assert (fast.scale_k, fast.n_seen, fast.geo_budget) == \
            (slow.scale_k, slow.n_seen, slow.geo_budget)


def test_pure_backend_stream_matches_compiled():
    # Same seed through the pure per-update fallback and the compiled driver.
    params = derive_params(0.05, 0.05, 20_000)
    gen = np.random.Generator(np.random.PCG64(5))
    keys = gen.integers(0, 2**64, size=8000, dtype=np.uint64)

    compiled = Sketch(4, 32, mode="aee", params=params, seed=3)
    compiled.run_stream(keys, None, ck.RngState(99))

    old = backend.backend_name()
    backend.use("pure")
    try:
        pure = Sketch(4, 32, mode="aee", params=params, seed=3)
        pure.run_stream(keys, None, pk.RngState(99))
    finally:
        backend.use(old)
    assert np.array_equal(compiled.lows, pure.lows)
    assert np.array_equal(compiled.exts, pure.exts)
    assert compiled.hash_evals == pure.hash_evals
