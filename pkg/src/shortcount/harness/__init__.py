"""Experiment rig: traces, ground truth, runners, reports, CLI."""

from .report import ExperimentReport, emit_report, parse_report
from .runner import ExperimentConfig, run_experiment
from .trace import TraceRecord, exact_oracle, gen_zipf, load_trace, write_trace

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "TraceRecord",
    "emit_report",
    "exact_oracle",
    "gen_zipf",
    "load_trace",
    "parse_report",
    "run_experiment",
    "write_trace",
]
