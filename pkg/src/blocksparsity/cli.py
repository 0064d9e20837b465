"""Command-line entry point.

Exit status: 0 on success, 2 for usage, file or parameter errors, 3 when the
data are degenerate (e.g. every measurement is zero).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .blocks import block_sparsity
from .errors import (DegenerateDataError, DomainError, EvaluationError, ParameterError)
from .estimation import estimate_block_sparsity, recovery_error_bound
from .experiments import PRESETS, load_config, preset, run_study, write_result
from .io import format_report, read_signal
from .measurement import NoiseModel, project
from .stable import RandomStream, StableSpec, sample_isotropic_vector

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 2, 3


class UsageError(Exception):
    pass


def _check(cond, msg):
    if not cond:
        raise ParameterError(msg)


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _noise(args):
    return NoiseModel.parse(args.noise, args.sigma)


def _common_checks(args):
    _check(0 < args.alpha <= 2, f"--alpha must lie in (0, 2], got {args.alpha}")
    _check(args.sigma >= 0, f"--sigma must be non-negative, got {args.sigma}")
    _check(0 <= args.seed < 2**64, "--seed must be a 64-bit unsigned integer")


def cmd_estimate(args):
    _common_checks(args)
    _check(args.alpha != 1, "--alpha must differ from 1 (alpha=1 is the reference set)")
    _check(args.gamma1 > 0, "--gamma1 must be positive")
    gamma_a = args.gamma_alpha
    if gamma_a is None:
        gamma_a = math.sqrt(2.0) / 2.0 if args.alpha == 2 else 1.0
    _check(gamma_a > 0, "--gamma-alpha must be positive")
    _check(args.n1 >= 1 and args.n_alpha >= 1, "--n1 and --n-alpha must be positive")
    _check(args.eta0 > 0, "--eta0 must be positive")
    _check(0 < args.beta < 1, "--beta must lie in (0, 1)")
    x = read_signal(args.signal, args.layout)
    noise = _noise(args)
    stream = RandomStream(args.seed)
    y1 = project(x, 1.0, args.gamma1, args.n1, noise, stream.substream(0), method=args.method)
    ya = project(x, args.alpha, gamma_a, args.n_alpha, noise, stream.substream(1), method=args.method)
    est = estimate_block_sparsity(y1, ya, args.eta0, args.beta)
    record = est.as_record()
    record["seed"] = args.seed
    if args.truth:
        record["k_true"] = block_sparsity(x, args.alpha)
    _emit(format_report(record, args.format), args.out)


def cmd_measure(args):
    _common_checks(args)
    _check(args.gamma > 0, "--gamma must be positive")
    _check(args.n >= 1, "--n must be positive")
    x = read_signal(args.signal, args.layout)
    ms = project(x, args.alpha, args.gamma, args.n, _noise(args), RandomStream(args.seed),
                 method=args.method)
    lines = ["y"] + [repr(float(v)) for v in ms.y]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_sample_stable(args):
    _check(0 < args.alpha <= 2, f"--alpha must lie in (0, 2], got {args.alpha}")
    _check(args.n >= 1, "--n must be positive")
    spec = StableSpec(args.dim, args.alpha, args.gamma)
    v = sample_isotropic_vector(spec, RandomStream(args.seed), size=args.n)
    header = ",".join(f"v{i}" for i in range(spec.dim))
    body = "\n".join(",".join(repr(float(a)) for a in row) for row in np.atleast_2d(v))
    _emit(header + "\n" + body + "\n", args.out)


def cmd_experiment(args):
    if (args.config is None) == (args.preset is None):
        raise UsageError("give exactly one of CONFIG or --preset")
    cfg = load_config(args.config) if args.config else preset(args.preset)
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, **overrides)
    result = run_study(cfg)
    stem = args.preset or os.path.splitext(os.path.basename(args.config))[0]
    for path in write_result(result, args.out, stem):
        print(path)


def cmd_bound(args):
    value = recovery_error_bound(args.k2, args.d, args.N, args.m, args.delta, args.x_l2,
                                 args.kappa2, args.kappa3)
    print(repr(value))


def build_parser():
    p = argparse.ArgumentParser(prog="blocksparsity",
                                description="Estimate block sparsity from stable random projections.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def signal_opts(sp):
        sp.add_argument("signal", help="signal file (text or binary)")
        sp.add_argument("--layout", help="override layout: d=<int> or comma list of block lengths")
        sp.add_argument("--sigma", type=float, default=0.1)
        sp.add_argument("--noise", default="gaussian", help="gaussian | laplace | uniform | t:<nu>")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--method", choices=("blockwise", "rows"), default="blockwise")
        sp.add_argument("--out", help="write to this file instead of standard output")

    sp = sub.add_parser("estimate", help="estimate k_alpha of a known signal from simulated measurements")
    signal_opts(sp)
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--gamma1", type=float, default=1.0)
    sp.add_argument("--gamma-alpha", type=float, default=None,
                    help="default sqrt(2)/2 for alpha=2, else 1")
    sp.add_argument("--n1", type=int, default=500)
    sp.add_argument("--n-alpha", type=int, default=500)
    sp.add_argument("--eta0", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=0.05)
    sp.add_argument("--truth", action="store_true", help="also report the exact k_alpha")
    sp.add_argument("--format", choices=("kv", "csv"), default="kv")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("measure", help="write noisy stable projections of a signal")
    signal_opts(sp)
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=1000)
    sp.set_defaults(func=cmd_measure)

    sp = sub.add_parser("sample-stable", help="draw isotropic symmetric stable vectors")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sample_stable)

    sp = sub.add_parser("experiment", help="run a Monte Carlo study and write CSV + manifest")
    sp.add_argument("config", nargs="?", help="key=value configuration file")
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--out", default="results")
    sp.add_argument("--replications", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("bound", help="evaluate the k_2-based recovery error bound")
    sp.add_argument("--k2", type=float, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--x-l2", type=float, default=1.0)
    sp.add_argument("--kappa2", type=float, default=1.0)
    sp.add_argument("--kappa3", type=float, default=1.0)
    sp.set_defaults(func=cmd_bound)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (DegenerateDataError, DomainError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ParameterError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
