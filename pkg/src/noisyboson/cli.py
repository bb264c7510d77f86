"""Command line front end.

Subcommands: prob, reduce, lemma1, bounds, sample, loss.  All randomness is
seeded explicitly (default seed 0); rerunning any command with the same seed
produces byte-identical output regardless of thread count (the worker pool
only fans out independent per-run work and results are collected in run
order).  Floating point values are printed with 17 significant digits
(round-trip exact).

Exit codes: 0 success, 1 internal numerical inconsistency (including a
reduce batch below its success threshold), 2 invalid configuration or
malformed input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bounds as bounds_mod
from . import noisyprob, reduction, sampler
from .errors import InternalConsistencyError
from .noisyprob import MAX_PHOTONS
from .randmat import derive_seed, load_matrix, sample_gaussian_matrix, sample_haar_unitary

_MATRIX_COMMANDS = ("prob", "reduce", "sample", "loss")


@dataclass(frozen=True)
class RunConfig:
    """Validated common invocation state shared by every subcommand."""

    command: str
    seed: int
    threads: int
    output_path: str
    output_format: str
    matrix_path: str = None
    gen_n: int = None
    trials: int = 1

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError(f"--threads must be >= 1, got {self.threads}")
        if self.trials < 1:
            raise ValueError(f"--trials must be >= 1, got {self.trials}")
        if self.command in _MATRIX_COMMANDS and (self.matrix_path is None) == (self.gen_n is None):
            raise ValueError("exactly one of --matrix and --gen is required")


def _config(args):
    return RunConfig(
        command=args.command,
        seed=args.seed,
        threads=args.threads,
        output_path=args.out,
        output_format=args.format,
        matrix_path=getattr(args, "matrix", None),
        gen_n=getattr(args, "gen", None),
        trials=getattr(args, "trials", 1),
    )


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _table_text(fmt, header, rows, aggregate=None):
    """Render rows as CSV (aggregates as trailing comment lines) or JSON."""
    if fmt == "csv":
        lines = [",".join(header)]
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        if aggregate:
            lines.extend(f"# {key}={_fmt(val)}" for key, val in aggregate.items())
        return "\n".join(lines) + "\n"
    payload = {"rows": [dict(zip(header, row)) for row in rows]}
    if aggregate:
        payload.update(aggregate)
    return json.dumps(payload, indent=2) + "\n"


def _write_output(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _float_list(text):
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _add_common(p, with_matrix=True, gen_help="generate a seeded N x N complex Gaussian matrix"):
    if with_matrix:
        src = p.add_argument_group("matrix source (exactly one)")
        src.add_argument("--matrix", metavar="PATH", help="matrix JSON file (fields rows/cols/re/im)")
        src.add_argument("--gen", type=int, metavar="N", help=gen_help)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker pool size (default 1)")
    p.add_argument("--out", metavar="PATH", default="-", help="output file, '-' for stdout")
    p.add_argument("--format", choices=("json", "csv"), default="csv", help="output format")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="noisyboson",
        description="Noisy boson sampling probabilities, bounds, extrapolation and sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prob", help="output probabilities on a grid of indistinguishability rates")
    _add_common(p)
    p.add_argument("--x", type=_float_list, default=[0.0, 0.5, 1.0], help="comma-separated x values")
    p.add_argument("--l", type=int, default=None, help="truncation degree (default N)")

    p = sub.add_parser("reduce", help="batch of seeded oracle-extrapolation runs")
    _add_common(p)
    p.add_argument("--c-min", type=float, default=None, help="noise-scale constant (default: k_min = 1)")
    p.add_argument("--kappa", type=float, default=reduction.KAPPA_DEFAULT)
    p.add_argument("--lambda", dest="lam", type=float, default=reduction.LAMBDA_DEFAULT)
    p.add_argument("--eps0", type=float, default=0.1, help="target additive error")
    p.add_argument("--delta0", type=float, default=0.05, help="target failure probability")
    p.add_argument("--l", type=int, default=None, help="override the polynomial degree")
    p.add_argument("--oracle", choices=("exact", "uniform", "adversarial", "failing"), default="exact")
    p.add_argument("--eps", type=float, default=None, help="oracle additive error (default from eps0/delta0)")
    p.add_argument("--delta", type=float, default=None, help="oracle failure probability")
    p.add_argument("--trials", type=int, default=10, help="number of seeded runs")
    p.add_argument("--success-threshold", type=float, default=0.99, help="exit 0 iff success rate >= this")

    p = sub.add_parser("lemma1", help="empirical truncation-error verification runs")
    _add_common(p, with_matrix=False)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--k", type=_float_list, default=[1.0, 2.0], help="mean distinguishable photon counts")
    p.add_argument("--l", type=_int_list, default=[4, 6], help="truncation degrees")
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=500)

    p = sub.add_parser("bounds", help="exact binomial tails against the closed-form bound")
    _add_common(p, with_matrix=False)
    p.add_argument("--N", type=_int_list, default=[8, 12, 16, 24])
    p.add_argument("--k", type=_int_list, default=[1, 2, 3])
    p.add_argument("--l", type=_int_list, default=None, help="degrees (default k+1..N/2 per N,k)")

    p = sub.add_parser("sample", help="sample the noisy sampler and compare with the exact distribution")
    _add_common(p, gen_help="generate a seeded M x M Haar-random unitary")
    p.add_argument("--n-photons", type=int, default=3)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10000)

    p = sub.add_parser("loss", help="combined loss + distinguishability probabilities")
    _add_common(p, gen_help="input photon count N of a seeded n x N Gaussian matrix")
    p.add_argument("--n-out", type=int, default=None, help="surviving photon count n (default N)")
    p.add_argument("--x", type=_float_list, default=[1.0])
    p.add_argument("--eta", type=_float_list, default=[0.5])

    return parser


def _square_matrix(config, max_n=MAX_PHOTONS):
    if config.matrix_path is not None:
        mat = load_matrix(config.matrix_path)
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    else:
        if config.gen_n < 1:
            raise ValueError(f"--gen must be >= 1, got {config.gen_n}")
        mat = sample_gaussian_matrix(config.gen_n, config.gen_n, config.seed)
    if mat.shape[0] > max_n:
        raise ValueError(f"N = {mat.shape[0]} exceeds the desk-scale cap N <= {max_n}")
    return mat


def cmd_prob(args, config):
    mat = _square_matrix(config)
    n = mat.shape[0]
    l = n if args.l is None else args.l
    header = ("x", "q_binomial", "q_permpair", f"q_truncated_l{l}", f"f_poly_l{l}")
    rows = []
    for x in args.x:
        q_b = noisyprob.q_noisy_binomial(x, mat).value
        q_p = noisyprob.q_noisy_permpair(x, mat).value if n <= noisyprob.MAX_PERMPAIR_PHOTONS else None
        q_t = noisyprob.q_truncated(l, x, mat).value
        f_p = noisyprob.f_poly_eval(l, x, mat) if x > 0 else None
        rows.append((x, q_b, q_p, q_t, f_p))
    return _table_text(config.output_format, header, rows)


def _reduce_run(seed, params, oracle_mode, eps, delta, run_index):
    """One seeded run: fresh matrix and fresh oracle stream per run index."""
    run_seed = derive_seed(seed, run_index, 0)
    mat = sample_gaussian_matrix(params.n_photons, params.n_photons, run_seed)
    spec = reduction.OracleSpec(mode=oracle_mode, eps=eps, delta=delta, seed=derive_seed(seed, run_index, 1))
    result = reduction.estimate_permanent_sq(mat, spec, params)
    return reduction.result_csv_row(run_seed, params, spec, result), result.success


def cmd_reduce(args, config):
    if config.matrix_path is not None:
        raise ValueError("reduce draws one fresh matrix per run; use --gen N")
    n = config.gen_n
    c_min = args.c_min if args.c_min is not None else 1.0 / math.log(n)
    params = reduction.make_params(
        c_min, n, args.eps0, args.delta0, kappa=args.kappa, lam=args.lam,
        l=args.l, eps=args.eps, delta=args.delta,
    )
    eps = args.eps if args.eps is not None else params.eps
    delta = args.delta if args.delta is not None else params.delta
    runs = list(range(config.trials))
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(
                lambda i: _reduce_run(config.seed, params, args.oracle, eps, delta, i), runs
            ))
    else:
        outcomes = [_reduce_run(config.seed, params, args.oracle, eps, delta, i) for i in runs]
    rows = [row for row, _ in outcomes]
    rate = sum(1 for _, ok in outcomes if ok) / len(outcomes)
    text = _table_text(config.output_format, reduction.RESULT_CSV_HEADER, rows, aggregate={"success_rate": rate})
    return text, (0 if rate >= args.success_threshold else 1)


def cmd_lemma1(args, config):
    rows = []
    for ki, k in enumerate(args.k):
        x = 1.0 - k / args.N
        for li, l in enumerate(args.l):
            report = bounds_mod.verify_lemma1(
                args.N, x, l, config.trials, derive_seed(config.seed, ki, li), delta=args.delta
            )
            rows.append(report.csv_row())
    return _table_text(config.output_format, bounds_mod.TailReport.CSV_HEADER, rows)


def cmd_bounds(args, config):
    header = ("N", "x", "l", "exact_tail", "chernoff_bound")
    rows = []
    for n in args.N:
        for k in args.k:
            x = 1.0 - k / n
            degrees = args.l if args.l is not None else range(k + 1, n // 2 + 1)
            for l in degrees:
                rows.append((n, x, l, bounds_mod.binomial_tail(n, x, l), bounds_mod.chernoff_tail_bound(n, x, l)))
    return _table_text(config.output_format, header, rows)


def cmd_sample(args, config):
    if config.matrix_path is not None:
        u = load_matrix(config.matrix_path)
    else:
        u = sample_haar_unitary(config.gen_n, derive_seed(config.seed, 0))
    exact = sampler.exact_distribution(u, args.x, args.n_photons)
    samples = sampler.sample_outcomes(u, args.x, args.n_photons, config.trials, derive_seed(config.seed, 1))
    empirical = sampler.empirical_distribution(samples)
    header = ("outcome", "exact_probability", "empirical_frequency")
    rows = [(pat.label(), prob, empirical.get(pat, 0.0)) for pat, prob in exact.items()]
    aggregate = {
        "tv_distance": sampler.tv_distance(exact, empirical),
        "total_probability": math.fsum(exact.values()),
    }
    return _table_text(config.output_format, header, rows, aggregate=aggregate)


def cmd_loss(args, config):
    if config.matrix_path is not None:
        mat = load_matrix(config.matrix_path)
    else:
        if not 1 <= config.gen_n <= MAX_PHOTONS:
            raise ValueError(f"--gen must lie in 1..{MAX_PHOTONS}, got {config.gen_n}")
        n_out = args.n_out if args.n_out is not None else config.gen_n
        mat = sample_gaussian_matrix(n_out, config.gen_n, config.seed)
    n_out = mat.shape[0]
    header = ("x", "eta", "n", "q_loss_dist", "q_loss")
    rows = []
    for x in args.x:
        for eta in args.eta:
            rows.append(
                (x, eta, n_out,
                 noisyprob.q_loss_dist(x, eta, n_out, mat).value,
                 noisyprob.q_loss(eta, n_out, mat).value)
            )
    return _table_text(config.output_format, header, rows)


_COMMANDS = {
    "prob": cmd_prob,
    "reduce": cmd_reduce,
    "lemma1": cmd_lemma1,
    "bounds": cmd_bounds,
    "sample": cmd_sample,
    "loss": cmd_loss,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config(args)
        out = _COMMANDS[args.command](args, config)
    except InternalConsistencyError as exc:
        print(f"internal numerical inconsistency: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if isinstance(out, tuple):
        text, code = out
    else:
        text, code = out, 0
    _write_output(text, config.output_path)
    return code


if __name__ == "__main__":
    sys.exit(main())
