"""Register contracts: parameter derivation, increments, weighted adds, query."""

import math

import pytest

from shortcount import (EstimatorOverflow, ParameterError, SamplingParams,
                        counter_variance_bound, derive_params)
from shortcount import Estimator, backend
from shortcount.rng import RngState

def test_reference_parameters_are_frozen():
    # Expected integers evaluated once at 60-digit precision (mpmath).
    p1 = derive_params(0.001, 0.0005, 10**9)
    assert p1.n_prime == 16_593_629
    assert p1.required_bits == 24
    assert p1.p == 16_593_629 / 10**9
    p2 = derive_params(0.05, 0.05, 10**6)
    assert p2.n_prime == 3_001


def test_probability_caps_at_one():
    params = derive_params(0.05, 0.05, 1000)  # n_total below the ceiling
    assert params.p == 1.0


@pytest.mark.parametrize("eps,delta,n", [
    (0.0, 0.1, 100), (1.0, 0.1, 100), (0.1, 0.0, 100), (0.1, 1.0, 100),
    (0.1, 0.1, 0), (-0.5, 0.1, 100),
])
def test_derive_params_rejects_bad_arguments(eps, delta, n):
    with pytest.raises(ParameterError):
        derive_params(eps, delta, n)


def test_from_probability():
    params = SamplingParams.from_probability(0.25, 1000)
    assert params.p == 0.25 and params.n_prime == 250
    with pytest.raises(ParameterError):
        SamplingParams.from_probability(0.0)
    with pytest.raises(ParameterError):
        SamplingParams.from_probability(1.5)


def test_pincrement_at_p_one_counts_exactly():
    params = SamplingParams.from_probability(1.0, 100)
    est = Estimator(16)
    rng = RngState(0)
    for _ in range(100):
        est.pincrement(params, rng)
    assert est.value == 100
    assert est.query(params) == 100.0


def test_pincrement_saturation_raises_before_drawing():
    params = SamplingParams.from_probability(0.5, 100)
    est = Estimator(4, value=15)
    rng = RngState(42)
    with pytest.raises(EstimatorOverflow):
        est.pincrement(params, rng)
    assert est.value == 15
    assert rng.next_u64() == RngState(42).next_u64()  # nothing consumed


def test_pincrement_binomial_concentration():
    # 1e6 increments at p=1/2 land within 3 sigma of Bin(1e6, 1/2).
    params = SamplingParams.from_probability(0.5, 10**6)
    est = Estimator(40)
    over = est.pincrement_many(params, 10**6, RngState(77))
    assert over == 0
    assert abs(est.value - 500_000) <= 3 * math.sqrt(250_000)


def test_pincrement_many_equals_individual_calls():
    params = SamplingParams.from_probability(0.3, 1000)
    bulk = Estimator(20)
    bulk.pincrement_many(params, 5000, RngState(11))
    slow = Estimator(20)
    rng = RngState(11)
    for _ in range(5000):
        slow.pincrement(params, rng)
    assert bulk.value == slow.value


def test_add_weighted_p_one_is_exact():
    params = SamplingParams.from_probability(1.0, 100)
    est = Estimator(16)
    est.add_weighted(params, 5, RngState(0))
    assert est.value == 5


def test_add_weighted_split_values():
    # p=0.5, w=7: deterministic part 3, residue probability 0.5.
    params = SamplingParams.from_probability(0.5, 100)
    outcomes = set()
    ups = 0
    trials = 2000
    for seed in range(trials):
        est = Estimator(16)
        est.add_weighted(params, 7, RngState(seed))
        outcomes.add(est.value)
        ups += est.value == 4
    assert outcomes == {3, 4}
    assert abs(ups - trials / 2) < 4 * math.sqrt(trials * 0.25)


def test_add_weighted_integral_product_is_deterministic():
    # p=0.25, w=4: w*p = 1 exactly, no coin.
    params = SamplingParams.from_probability(0.25, 100)
    for seed in range(50):
        est = Estimator(16)
        est.add_weighted(params, 4, RngState(seed))
        assert est.value == 1
    with pytest.raises(ParameterError):
        Estimator(16).add_weighted(params, -1, RngState(0))


def test_add_weighted_overflow_signal():
    params = SamplingParams.from_probability(1.0, 100)
    est = Estimator(4, value=14)
    with pytest.raises(EstimatorOverflow):
        est.add_weighted(params, 5, RngState(0))
    assert est.value == 14


def test_unit_add_is_identical_to_pincrement():
    # Add(1) and a probabilistic increment share the same success path
    # (deterministic part 0, coin probability p): same seed, same register.
    for p in (0.3, 0.7, 1.0):
        params = SamplingParams.from_probability(p, 100)
        a, b = Estimator(30), Estimator(30)
        ra, rb = RngState(5), RngState(5)
        for _ in range(2000):
            a.pincrement(params, ra)
            b.add_weighted(params, 1, rb)
        assert a.value == b.value


def test_query_scales_by_inverse_probability():
    params = SamplingParams.from_probability(0.001, 10**9)
    est = Estimator(24, value=1000)
    assert est.query(params) == 10**6
    assert Estimator(24).query(params) == 0.0


def test_variance_bound_values():
    assert counter_variance_bound(SamplingParams.from_probability(1.0, 10), 10**6) == 0.0
    params = SamplingParams.from_probability(0.5, 10**6)
    assert counter_variance_bound(params, 10**6) == 250_000.0
    with pytest.raises(ParameterError):
        counter_variance_bound(params, -1)


def test_empirical_variance_within_bound():
    # Repeated fixed weighted stream; register variance stays under W*p*(1-p).
    import numpy as np
    p = 1 / 64
    params = SamplingParams.from_probability(p, 10**6)
    weights = np.array([137, 63] * 100, dtype=np.int64)  # W = 20000
    total = int(weights.sum())
    kern = backend.kernels()
    trials = 10**4
    values = [kern.weighted_run(RngState(1000 + t), weights, p) for t in range(trials)]
    mean = sum(values) / trials
    var = sum((v - mean) ** 2 for v in values) / (trials - 1)
    bound = counter_variance_bound(params, total)
    se = var * math.sqrt(2.0 / (trials - 1))
    assert var <= bound + 5 * se


def test_weighted_stream_is_unbiased():
    # Mean of query over repeated streams within 5 standard errors of W.
    p = 0.3
    params = SamplingParams.from_probability(p, 10**6)
    import numpy as np
    weights = np.array([100] * 100, dtype=np.int64)  # W = 10000
    total = int(weights.sum())
    kern = backend.kernels()
    trials = 2000
    est_mean = sum(kern.weighted_run(RngState(7000 + t), weights, p) / p
                   for t in range(trials)) / trials
    tol = 5 * math.sqrt(total * (1 - p) / (p * trials))
    assert abs(est_mean - total) <= tol
