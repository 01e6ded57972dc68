"""Experiment result records and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

from scipy import stats

# Stable field order shared by the JSON and CSV emitters.
FIELDS = [
    "config",
    "trial_count",
    "normalized_error",
    "normalized_error_ci",
    "per_flow_mae",
    "per_flow_mae_ci",
    "on_arrival_error",
    "throughput_mops",
    "throughput_mops_ci",
    "memory_bytes_analytical",
    "memory_bytes_actual",
]


@dataclass
class ExperimentReport:
    """Aggregated metrics over the trials of one experiment point.

    ``*_ci`` fields are 95% Student-t halfwidths over trials (NaN with fewer
    than two trials). ``normalized_error`` is the mean per-flow absolute
    error divided by the total stream weight; ``per_flow_mae`` is the same
    numerator unnormalized. ``on_arrival_error`` is None unless the run asked
    for it.
    """

    config: dict = field(default_factory=dict)
    trial_count: int = 0
    normalized_error: float = math.nan
    normalized_error_ci: float = math.nan
    per_flow_mae: float = math.nan
    per_flow_mae_ci: float = math.nan
    on_arrival_error: float | None = None
    throughput_mops: float = math.nan
    throughput_mops_ci: float = math.nan
    memory_bytes_analytical: float = math.nan
    memory_bytes_actual: float = math.nan


def t_halfwidth(values, confidence: float = 0.95) -> float:
    """95% Student-t halfwidth of the mean; NaN for fewer than two values."""
    n = len(values)
    if n < 2:
        return math.nan
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    tcrit = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1))
    return tcrit * math.sqrt(var / n)


def emit_report(report: ExperimentReport, path, fmt: str = "json") -> None:
    """Serialize a report; ``fmt`` is "json" or "csv" (one row plus header)."""
    data = asdict(report)
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({k: data[k] for k in FIELDS}, fh, indent=2)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(FIELDS)
            row = []
            for k in FIELDS:
                v = data[k]
                row.append(json.dumps(v) if k == "config" else v)
            writer.writerow(row)
    else:
        raise ValueError(f"unknown report format: {fmt!r}")


def _coerce(key: str, value):
    if key == "config":
        return value if isinstance(value, dict) else json.loads(value)
    if key == "trial_count":
        return int(value)
    if value is None or value == "":
        return None
    return float(value)


def parse_report(path, fmt: str | None = None) -> ExperimentReport:
    """Read back a report emitted by :func:`emit_report`."""
    if fmt is None:
        fmt = "csv" if str(path).endswith(".csv") else "json"
    if fmt == "json":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) != 2 or rows[0] != FIELDS:
            raise ValueError(f"{path}: not a single-row report CSV")
        data = dict(zip(rows[0], rows[1]))
    return ExperimentReport(**{k: _coerce(k, data[k]) for k in FIELDS})
