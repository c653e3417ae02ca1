"""Command-line entry point: ``tailvi {gmm,tail,validate}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from .divergences import parse_spec
from .experiment import ExperimentConfig, canonical_key, coerce_config_value, load_config_file, run_experiment
from .tails import (
    analytic_gaussian_ratio_tail_index,
    default_k,
    moment_existence_probe,
    tail_report,
)

# flag dest -> config field; only flags given on the command line override the file
_GMM_FLAGS = (
    ("--dim", int), ("--scale", float), ("--batch", int), ("--iters", int), ("--lr", float),
    ("--optimizer", str), ("--temperature", float), ("--trials", int), ("--seed", int),
    ("--out", str), ("--eval-every", int), ("--target-components", int),
    ("--proposal-components", int), ("--eval-samples", int), ("--jobs", int),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailvi", description="Tail-adaptive f-divergence variational inference.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gmm = sub.add_parser("gmm", help="run the Gaussian-mixture experiment and write CSV results")
    gmm.add_argument("--config", help="key = value file; command-line flags take precedence")
    for flag, kind in _GMM_FLAGS:
        gmm.add_argument(flag, type=kind, default=None)
    gmm.add_argument("--spec", action="append", default=None,
                     help="divergence in canonical form (repeatable), e.g. tail-adaptive:-1, kl-forward, alpha:0.5")
    gmm.add_argument("--estimator", choices=("reparam", "score"), default=None)

    tail = sub.add_parser("tail", help="tail-index diagnostics for a batch of log density ratios")
    src = tail.add_mutually_exclusive_group(required=True)
    src.add_argument("path", nargs="?", help="text file with one log-ratio per line")
    src.add_argument("--gaussian", nargs=2, type=float, metavar=("SIGMA_P", "SIGMA_Q"),
                     help="sample log-ratios of N(0, SIGMA_P^2) / N(0, SIGMA_Q^2) under q")
    tail.add_argument("-n", type=int, default=100_000, help="sample size for --gaussian")
    tail.add_argument("--seed", type=int, default=0)
    tail.add_argument("-k", type=int, default=None, help="order statistics used (default floor(n^0.6), <= n/10)")
    tail.add_argument("--moment", type=float, action="append", default=[],
                      help="also report log mean(w^alpha) for this alpha (repeatable)")

    val = sub.add_parser("validate", help="run the quadrature and gradient oracle checks")
    val.add_argument("--seed", type=int, default=0)
    return parser


def _gmm_config(args) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    for flag, _ in _GMM_FLAGS:
        dest = flag[2:].replace("-", "_")
        v = getattr(args, dest)
        if v is not None:
            key = canonical_key(dest)
            values[key] = coerce_config_value(key, v)
    if args.spec:
        values["divergence_specs"] = tuple(parse_spec(s) for s in args.spec)
    if args.estimator:
        values["estimator"] = args.estimator
    return ExperimentConfig(**values)


def _cmd_gmm(args) -> int:
    config = _gmm_config(args)
    rows, summary = run_experiment(config)
    print(f"wrote {len(rows)} rows to {config.output_path}")
    print(f"wrote summary to {config.summary_path}")
    for rec in summary:
        print(f"  {rec[0]:<20} mode_shift {rec[3]:.4f} (se {rec[4]:.4f}), aborted {rec[2]}/{rec[1]}")
    return 0


def _cmd_tail(args) -> int:
    analytic = None
    if args.gaussian:
        sp, sq = args.gaussian
        rng = np.random.default_rng(args.seed)
        x = rng.normal(scale=sq, size=args.n)
        log_w = math.log(sq / sp) + 0.5 * x**2 * (1.0 / sq**2 - 1.0 / sp**2)
        analytic = analytic_gaussian_ratio_tail_index(sp, sq)
    else:
        log_w = np.loadtxt(args.path, ndmin=1)
    k = default_k(log_w.size) if args.k is None else args.k
    report = tail_report(log_w, k, analytic)
    print(f"n = {report.sample_size}, k = {report.order_statistics_used}")
    print(f"hill tail index = {report.hill_estimate:.6g}")
    if report.analytic_index is not None:
        print(f"analytic tail index = {report.analytic_index:.6g}")
    for a in args.moment:
        print(f"log mean(w^{a:g}) = {moment_existence_probe(log_w, a):.6g}")
    return 0


def _cmd_validate(args) -> int:
    from .validation import run_all

    checks = run_all(seed=args.seed)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"gmm": _cmd_gmm, "tail": _cmd_tail, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"tailvi: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
