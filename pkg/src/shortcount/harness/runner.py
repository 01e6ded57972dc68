"""Experiment runner: build a structure, stream a trace, measure, aggregate.

An experiment point is (algorithm, counter mode, parameters, trace source)
run for ``trials`` repetitions with per-trial derived seeds. Throughput is
timed around the update loop only; ingestion, oracle building, and querying
are excluded. Error metrics compare end-of-stream per-flow estimates against
the exact oracle (on-arrival error is available behind a flag and is much
slower since it forces the per-update path).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .. import backend
from ..cache import CacheTable
from ..errors import ConfigError
from ..estimator import derive_params
from ..hashing import derive_seed, fnv1a64
from ..rng import RngState
from ..sketch import Sketch
from .report import ExperimentReport, t_halfwidth
from .trace import ZipfTrace, load_trace

ALGORITHMS = ("aee-single", "cms", "cu", "ss", "rap", "dway-rap")
MODES = ("exact", "aee", "aee-maxacc", "aee-maxspeed")


@dataclass
class ExperimentConfig:
    """One experiment point; see ``from_file`` for the config-file schema."""

    algorithm: str = "cms"
    mode: str = "exact"
    epsilon: float = 0.01
    delta: float = 0.01
    n_total: int = 0            # 0: use the trace length (or total weight)
    depth: int = 4
    width: int = 1024
    width_bits: int = 0         # 0: derive from the parameters
    exact_bits: int = 32
    delta_o: float = 2e-15
    downsample: str = "deterministic"
    capacity: int = 1024
    ways: int = 16              # dway-rap only
    fingerprint_bits: int = 0   # 0: store full folded ids
    trace: str = ""             # CSV path; empty: generate a Zipf trace
    zipf_n: int = 1_000_000
    zipf_universe: int = 100_000
    zipf_skew: float = 1.0
    trials: int = 10
    seed: int = 1
    measure: str = "both"       # error | speed | both
    on_arrival: bool = False

    _BOOL = ("on_arrival",)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        values = {}
        names = {f.name: f.type for f in fields(cls) if not f.name.startswith("_")}
        defaults = cls()
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                key = key.strip().replace("-", "_")
                value = value.strip()
                if not sep or not key or not value:
                    raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
                if key not in names:
                    raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
                current = getattr(defaults, key)
                if isinstance(current, bool):
                    values[key] = value.lower() in ("1", "true", "yes", "on")
                elif isinstance(current, int):
                    values[key] = int(float(value))
                elif isinstance(current, float):
                    values[key] = float(value)
                else:
                    values[key] = value
        return cls(**values)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.measure not in ("error", "speed", "both"):
            raise ConfigError(f"unknown measure {self.measure!r}")
        if self.algorithm in ("ss", "rap", "dway-rap"):
            if self.mode not in ("exact", "aee"):
                raise ConfigError("caches support exact or aee counters only")
            if self.algorithm == "dway-rap" and self.capacity % self.ways != 0:
                raise ConfigError("capacity must be a multiple of ways")


@dataclass
class _LoadedTrace:
    keys64: np.ndarray
    weights: np.ndarray | None
    flow_keys: list   # distinct folded ids, aligned with truth
    truth: np.ndarray
    n_packets: int
    total_weight: int
    ids: list | None = None  # distinct raw ids (bytes), caches need them


def _load(config: ExperimentConfig) -> _LoadedTrace:
    if config.trace:
        records = list(load_trace(config.trace))
        totals: dict[bytes, int] = {}
        for fid, w in records:
            totals[fid] = totals.get(fid, 0) + w
        ids = list(totals.keys())
        truth = np.array([totals[i] for i in ids], dtype=np.int64)
        key_of = {i: fnv1a64(i) for i in ids}
        keys64 = np.array([key_of[fid] for fid, _ in records], dtype=np.uint64)
        weights = np.array([w for _, w in records], dtype=np.int64)
        n = len(records)
        total = int(weights.sum())
        return _LoadedTrace(keys64, weights, [key_of[i] for i in ids], truth,
                            n, total, ids=ids)
    from .trace import gen_zipf, oracle_from_ranks
    zt = gen_zipf(config.zipf_n, config.zipf_universe, config.zipf_skew, config.seed)
    keys64 = zt.keys64()
    counts = oracle_from_ranks(zt.ranks, zt.universe)
    present = np.nonzero(counts)[0]
    lut = np.empty(zt.universe, dtype=np.uint64)
    for r in range(zt.universe):
        lut[r] = fnv1a64(ZipfTrace.flow_id(r))
    ids = [ZipfTrace.flow_id(int(r)) for r in present]
    return _LoadedTrace(keys64, None, [int(lut[r]) for r in present],
                        counts[present].astype(np.int64), len(zt), len(zt),
                        ids=ids)


def _build(config: ExperimentConfig, params, trial_seed: int):
    mode = config.mode
    if config.algorithm in ("cms", "cu"):
        width_bits = config.width_bits
        if not width_bits and mode in ("aee-maxacc", "aee-maxspeed"):
            width_bits = params.required_bits + 1 if mode == "aee-maxspeed" else 16
        return Sketch(config.depth, config.width, mode=mode,
                      conservative=config.algorithm == "cu",
                      params=None if mode == "exact" else params,
                      exact_bits=config.exact_bits, width_bits=width_bits or 16,
                      delta_o=config.delta_o, downsample_kind=config.downsample,
                      seed=trial_seed)
    if config.algorithm in ("ss", "rap", "dway-rap"):
        return CacheTable(
            config.capacity,
            policy="rap" if config.algorithm.endswith("rap") else "space-saving",
            ways=config.ways if config.algorithm == "dway-rap" else None,
            counter_mode="exact" if mode == "exact" else "aee",
            params=None if mode == "exact" else params,
            key_mode="fingerprint" if config.fingerprint_bits else "full",
            fingerprint_bits=config.fingerprint_bits or None,
            seed=trial_seed)
    return None  # aee-single handled inline


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run all trials of one experiment point and aggregate the metrics."""
    config.validate()
    data = _load(config)
    n_total = config.n_total or data.total_weight
    params = None
    if config.mode != "exact" or config.algorithm == "aee-single":
        params = derive_params(config.epsilon, config.delta, n_total)
        if config.algorithm == "aee-single" and config.width_bits:
            if config.width_bits < params.required_bits:
                raise ConfigError(
                    f"width_bits {config.width_bits} below the "
                    f"{params.required_bits} bits the parameters need")
    want_error = config.measure in ("error", "both")
    want_speed = config.measure in ("speed", "both")
    norm_errors, maes, mops_list, arrival_errors = [], [], [], []
    mem_analytical = math.nan
    mem_actual = math.nan
    for trial in range(config.trials):
        trial_seed = derive_seed(config.seed, trial)
        rng = RngState(trial_seed)
        t0 = time.perf_counter()
        if config.algorithm == "aee-single":
            kern = backend.kernels()
            if data.weights is None:
                value, _ = kern.pi_run(rng, data.n_packets, params.p)
            else:
                value = kern.weighted_run(rng, data.weights, params.p)
            elapsed = time.perf_counter() - t0
            estimate = value / params.p
            err = abs(estimate - data.total_weight)
            norm_errors.append(err / data.total_weight)
            maes.append(err)
            mem_analytical = mem_actual = math.ceil(params.required_bits / 8)
        else:
            structure = _build(config, params, trial_seed)
            if isinstance(structure, Sketch):
                structure.run_stream(data.keys64,
                                     data.weights, rng)
                elapsed = time.perf_counter() - t0
                if want_error:
                    est = structure.query_many(
                        np.array(data.flow_keys, dtype=np.uint64))
                    abs_err = np.abs(est - data.truth)
                    maes.append(float(abs_err.mean()))
                    norm_errors.append(float(abs_err.mean()) / data.total_weight)
                mem_analytical = structure.memory_analytical_bytes()
                mem_actual = structure.memory_actual_bytes()
            else:
                folded = [structure.fold_key(i) for i in data.ids]
                fold_of = dict(zip(data.flow_keys, folded))
                keys = data.keys64.tolist()
                weights = (data.weights.tolist() if data.weights is not None
                           else None)
                t0 = time.perf_counter()
                if weights is None:
                    for key64 in keys:
                        structure.update_folded(fold_of[key64], 1, rng)
                else:
                    for key64, w in zip(keys, weights):
                        structure.update_folded(fold_of[key64], w, rng)
                elapsed = time.perf_counter() - t0
                if want_error:
                    errs = [abs(structure.query_folded(f) - int(t))
                            for f, t in zip(folded, data.truth)]
                    maes.append(sum(errs) / len(errs))
                    norm_errors.append(maes[-1] / data.total_weight)
                from ..cache import entry_footprint
                per_entry = entry_footprint(
                    "fingerprint" if config.fingerprint_bits else "full",
                    "exact" if config.mode == "exact" else "aee",
                    key_bits=config.fingerprint_bits or None,
                    counter_bits=config.exact_bits if config.mode == "exact"
                    else (config.width_bits or 16))
                mem_analytical = mem_actual = per_entry * config.capacity
        if want_speed:
            mops_list.append(data.n_packets / elapsed / 1e6)
        if config.on_arrival and want_error:
            arrival_errors.append(_on_arrival_error(config, params, data,
                                                    derive_seed(config.seed, trial)))
    report = ExperimentReport(config=asdict(config), trial_count=config.trials)
    if norm_errors:
        report.normalized_error = sum(norm_errors) / len(norm_errors)
        report.normalized_error_ci = t_halfwidth(norm_errors)
        report.per_flow_mae = sum(maes) / len(maes)
        report.per_flow_mae_ci = t_halfwidth(maes)
    if arrival_errors:
        report.on_arrival_error = sum(arrival_errors) / len(arrival_errors)
    if mops_list:
        report.throughput_mops = sum(mops_list) / len(mops_list)
        report.throughput_mops_ci = t_halfwidth(mops_list)
    report.memory_bytes_analytical = float(mem_analytical)
    report.memory_bytes_actual = float(mem_actual)
    return report


def _on_arrival_error(config: ExperimentConfig, params, data: _LoadedTrace,
                      trial_seed: int) -> float:
    """Mean per-packet |estimate-before-update - running truth| / total."""
    rng = RngState(trial_seed)
    structure = _build(config, params, trial_seed)
    running: dict[int, int] = {}
    total_err = 0.0
    keys = data.keys64.tolist()
    weights = data.weights.tolist() if data.weights is not None else [1] * len(keys)
    if isinstance(structure, Sketch):
        for key64, w in zip(keys, weights):
            total_err += abs(structure.query_u64(key64) - running.get(key64, 0))
            structure.update_u64(key64, w, rng)
            running[key64] = running.get(key64, 0) + w
    else:
        fold_of = dict(zip(data.flow_keys,
                           [structure.fold_key(i) for i in data.ids]))
        for key64, w in zip(keys, weights):
            f = fold_of[key64]
            total_err += abs(structure.query_folded(f) - running.get(key64, 0))
            structure.update_folded(f, w, rng)
            running[key64] = running.get(key64, 0) + w
    return total_err / len(keys) / data.total_weight
