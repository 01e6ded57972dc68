"""Command-line entry points: ``shortcount run | gen | params``."""

from __future__ import annotations

import argparse
import sys

from .. import backend
from ..cache import fingerprint_length
from ..earray import choose_threshold, oversampling_bound
from ..estimator import derive_params
from .report import emit_report
from .runner import ExperimentConfig, run_experiment
from .trace import gen_zipf, write_trace


def _cmd_gen(args) -> int:
    trace = gen_zipf(args.n, args.universe, args.skew, args.seed)
    write_trace(args.out, trace.records())
    print(f"wrote {len(trace)} records over {args.universe} flows to {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config)
    fmt = args.format or ("csv" if str(args.out).endswith(".csv") else "json")
    emit_report(report, args.out, fmt)
    print(f"backend={backend.backend_name()} "
          f"normalized_error={report.normalized_error:.6g} "
          f"per_flow_mae={report.per_flow_mae:.6g} "
          f"throughput={report.throughput_mops:.3f} Mops -> {args.out}")
    return 0


def _cmd_params(args) -> int:
    params = derive_params(args.epsilon, args.delta, args.n_total)
    print(f"n_prime        = {params.n_prime}")
    print(f"p              = {params.p:.10g}")
    print(f"required_bits  = {params.required_bits}")
    if args.width:
        t = choose_threshold(args.width, params, args.delta_o)
        n_tilde = oversampling_bound(params.n_prime, args.delta_o)
        print(f"threshold      = {t} (width {args.width}, delta_o {args.delta_o:g})")
        print(f"n_tilde        = {n_tilde:.2f}")
        print(f"heavy_capacity = {int(n_tilde // t)}")
    if args.eps_f and args.delta_f:
        bits = fingerprint_length(args.alpha, args.eps_f, args.delta_f)
        print(f"fingerprint_L  = {bits} bits (alpha {args.alpha:g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shortcount",
        description="Streaming frequency estimation with short sampled counters.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a Zipf trace CSV")
    gen.add_argument("--out", required=True)
    gen.add_argument("--n", type=int, default=1_000_000)
    gen.add_argument("--universe", type=int, default=100_000)
    gen.add_argument("--skew", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=1)
    gen.set_defaults(func=_cmd_gen)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--format", choices=("json", "csv"))
    run.set_defaults(func=_cmd_run)

    par = sub.add_parser("params", help="print derived parameters")
    par.add_argument("--epsilon", type=float, required=True)
    par.add_argument("--delta", type=float, required=True)
    par.add_argument("--n-total", type=int, required=True)
    par.add_argument("--width", type=int, default=0)
    par.add_argument("--delta-o", type=float, default=2e-15)
    par.add_argument("--alpha", type=float, default=10.0 / 11.0)
    par.add_argument("--eps-f", type=float, default=0.0)
    par.add_argument("--delta-f", type=float, default=0.0)
    par.set_defaults(func=_cmd_params)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
