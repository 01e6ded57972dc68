"""Estimator arrays: threshold choice, carries, pigeonhole bound, accounting."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shortcount import (EstimatorArray, ParameterError, SamplingParams,
                        choose_threshold, derive_params, oversampling_bound)
from shortcount.rng import RngState

REF_PARAMS = derive_params(0.001, 0.0005, 10**9)


def test_oversampling_bound_values():
    # ln(1) = 0: the bound degenerates to n_prime itself.
    assert oversampling_bound(1000, 1.0) == 1000.0
    # Frozen from a 60-digit evaluation: 1e6 + sqrt(3e6 * ln(1e6)).
    got = oversampling_bound(10**6, 1e-6)
    assert math.isclose(got, 1_006_437.8980788680, rel_tol=1e-12)
    with pytest.raises(ParameterError):
        oversampling_bound(-1, 0.5)
    with pytest.raises(ParameterError):
        oversampling_bound(10, 0.0)


def test_reference_threshold_and_heavy_capacity():
    # w=1024, eps=0.1%, delta=0.05%, delta_o=2e-15: byte-aligned threshold
    # 2^16 and capacity for exactly 253 heavy slots.
    arr = EstimatorArray(1024, REF_PARAMS, delta_o=2e-15)
    assert arr.threshold == 2**16
    assert arr.heavy_capacity == 253
    assert math.isclose(arr.config.n_tilde, 16_634_676.112485088, rel_tol=1e-12)
    assert math.isclose(arr.config.n_tilde - REF_PARAMS.n_prime, 4.1047e4,
                        rel_tol=1e-3)


def test_reference_memory_accounting():
    arr = EstimatorArray(1024, REF_PARAMS, delta_o=2e-15)
    # Analytical: 1024 slots * 16 bits + 253 heavy * (10 + 2) bits.
    assert arr.memory_analytical_bytes() == (1024 * 16 + 253 * 12) / 8
    assert arr.memory_analytical_bytes() < 2500
    # Plain 3-byte slots for the same width need 3KB, ~20% more space.
    plain = 1024 * 3
    assert plain / arr.memory_analytical_bytes() > 1.2
    # Actual layout: 2-byte slots, heavy entries at 2B index + 1B extension.
    assert arr.memory_actual_bytes() == 1024 * 2 + len(arr.heavy) * 3


def test_degenerate_width_falls_back_to_full_slots():
    params = derive_params(0.05, 0.05, 10**6)
    assert choose_threshold(1, params, 0.01) == 1 << params.required_bits


def test_carry_into_heavy_table():
    params = SamplingParams.from_probability(1.0, 10**6)
    arr = EstimatorArray(8, params, delta_o=0.01, threshold=16)
    rng = RngState(0)
    for _ in range(16):
        arr.pincrement(3, rng)
    assert arr.lows[3] == 0
    assert arr.heavy == {3: 1}
    assert arr.raw_count(3) == 16
    assert arr.query(3) == 16.0


def test_weighted_carry_and_zero_add():
    params = SamplingParams.from_probability(1.0, 10**6)
    arr = EstimatorArray(8, params, delta_o=0.01, threshold=16)
    arr.add(2, 16 + 3, RngState(0))
    assert arr.heavy.get(2) == 1 and arr.lows[2] == 3
    arr.add(2, 0, RngState(0))
    assert arr.raw_count(2) == 19


def test_quarter_probability_integral_add():
    params = SamplingParams.from_probability(0.25, 100)
    arr = EstimatorArray(8, params, delta_o=0.01, threshold=256)
    arr.add(5, 8, RngState(0))  # 8 * 0.25 = 2 exactly
    assert arr.raw_count(5) == 2


def test_index_errors():
    arr = EstimatorArray(8, REF_PARAMS)
    with pytest.raises(IndexError):
        arr.pincrement(8, RngState(0))
    with pytest.raises(IndexError):
        arr.query(-1)


def test_invalid_construction():
    with pytest.raises(ParameterError):
        EstimatorArray(0, REF_PARAMS)
    with pytest.raises(ParameterError):
        EstimatorArray(8, REF_PARAMS, delta_o=0.0)
    with pytest.raises(ParameterError):
        EstimatorArray(8, REF_PARAMS, threshold=48)  # not a power of two


def test_sum_preserved_at_p_one_and_pigeonhole():
    params = SamplingParams.from_probability(1.0, 10**6)
    arr = EstimatorArray(16, params, delta_o=0.01, threshold=64)
    rng = RngState(1)
    per_slot = [0] * 16
    total = 0
    for step in range(3001):
        slot = step * 7 % 16
        w = (step * 13) % 9
        arr.add(slot, w, rng)
        per_slot[slot] += w
        total += w
    assert arr.total_increments == total
    assert sum(arr.raw_count(i) for i in range(16)) == total
    assert all(arr.raw_count(i) == per_slot[i] for i in range(16))
    assert len(arr.heavy) <= total // arr.threshold


@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 200)),
                min_size=1, max_size=400),
       st.integers(min_value=0, max_value=2**32))
@settings(max_examples=60, deadline=None)
def test_pigeonhole_heavy_bound_holds_always(ops, seed):
    params = SamplingParams.from_probability(0.8, 10**6)
    arr = EstimatorArray(16, params, delta_o=0.01, threshold=32)
    rng = RngState(seed)
    for slot, w in ops:
        arr.add(slot, w, rng)
        assert len(arr.heavy) <= arr.total_increments // arr.threshold


def test_over_budget_flag_latches_but_array_keeps_counting():
    params = SamplingParams.from_probability(1.0, 10**6)
    arr = EstimatorArray(4, params, delta_o=0.99, threshold=4)
    rng = RngState(0)
    assert arr.heavy_capacity < 4
    for slot in range(4):
        arr.add(slot, 4, rng)  # four heavy slots
    assert arr.over_budget
    assert arr.raw_count(0) == 4
    arr.add(0, 4, rng)
    assert arr.raw_count(0) == 8  # still counting past the contract
