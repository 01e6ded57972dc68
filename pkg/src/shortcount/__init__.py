"""Short probabilistic counters with additive error for stream measurement.

The building block is a register that counts each unit with a shared
probability p chosen from (epsilon, delta, planned total); estimates carry an
additive error of at most epsilon * total with probability 1 - delta, in
ceil(log2(1 + n_prime)) bits regardless of the total. On top of it:
self-scaling variants for unknown totals, threshold/extension arrays,
count-min / conservative-update sketches, evict-min caches with fingerprint
keys, and a benchmark harness with a CLI (``shortcount run|gen|params``).

Hot loops run in a compiled extension when built (see
:mod:`shortcount.backend`); a pure-Python twin keeps everything working
without it.
"""

from .backend import backend_name, has_compiled
from .cache import (CacheTable, FingerprintSpec, cache_footprint_bytes,
                    collision_failure_prob, entry_footprint, fingerprint_length)
from .earray import ArrayConfig, EstimatorArray, choose_threshold, oversampling_bound
from .errors import ConfigError, EstimatorOverflow, ParameterError
from .estimator import Estimator, SamplingParams, counter_variance_bound, derive_params
from .rng import RngState, derive_seed
from .scaling import (DynamicEstimator, ScaleState, deamortized_sweep,
                      downsample_deterministic, downsample_probabilistic,
                      max_accuracy_add, max_speed_add, skip_count)
from .sketch import ErrorBudget, Sketch, error_budget

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig",
    "CacheTable",
    "ConfigError",
    "DynamicEstimator",
    "ErrorBudget",
    "Estimator",
    "EstimatorArray",
    "EstimatorOverflow",
    "FingerprintSpec",
    "ParameterError",
    "RngState",
    "SamplingParams",
    "ScaleState",
    "Sketch",
    "backend_name",
    "cache_footprint_bytes",
    "choose_threshold",
    "collision_failure_prob",
    "counter_variance_bound",
    "deamortized_sweep",
    "derive_params",
    "derive_seed",
    "downsample_deterministic",
    "downsample_probabilistic",
    "entry_footprint",
    "error_budget",
    "fingerprint_length",
    "has_compiled",
    "max_accuracy_add",
    "max_speed_add",
    "oversampling_bound",
    "skip_count",
]
