"""Command-line interface: ``qratio {ci,compare,simulate,reconstruct,influence}``.

Exit codes: 0 success, 2 input error, 3 inference error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .distributions import fit_gamma_mom, parse_distribution
from .errors import InferenceError, InputError
from .income_ingest import (
    ReconstructionPolicy,
    parse_table,
    reconstruct,
    reconstruction_size,
    shipped_table_path,
)
from .quantile_core import sort_sample
from .quantile_density import BandwidthSpec
from .ratio_inference import QuantilePair, estimate_ratio, infer_ratio
from .robustness import SURFACE_COLUMNS, AnalyticDistribution, influence_surface
from .sim_harness import CoverageConfig, run
from .two_sample import compare_ratios

EXIT_INPUT = 2
EXIT_INFERENCE = 3

KEY_RATIOS = ((0.9, 0.1), (0.8, 0.2), (0.8, 0.5), (0.2, 0.5))

log = logging.getLogger("qratio")


def _fmt(v):
    return f"{v:.6g}"


def _interval(iv):
    return f"[{_fmt(iv[0])}, {_fmt(iv[1])}]"


def read_values(path, column=None):
    """Numbers from a one-per-line file, or from a named column of a CSV file.

    Blank lines and lines starting with ``#`` are skipped.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if column is not None:
        reader = csv.DictReader(io.StringIO("\n".join(lines)))
        if column not in (reader.fieldnames or []):
            raise InputError(f"{path}: no column {column!r}")
        raw = [(i + 2, row[column]) for i, row in enumerate(reader)]
    else:
        raw = list(enumerate(lines, start=1))
    values = []
    for lineno, token in raw:
        try:
            values.append(float(token))
        except (TypeError, ValueError):
            raise InputError(f"{path}:{lineno}: not a number: {token!r}") from None
    return sort_sample(values, source=str(path))


def _bandwidth(args):
    return BandwidthSpec(
        boundary_correct=not args.no_boundary_correct,
        upper_clamp=args.upper_clamp,
        override=args.bandwidth_override,
    )


def _pair(args):
    return QuantilePair(args.p, args.q)


def _emit(args, text):
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# -- subcommands

def cmd_ci(args):
    s = read_values(args.data, args.column)
    res = infer_ratio(s, _pair(args), args.conf, _bandwidth(args))
    d = res.as_dict()
    if args.method == "vst":
        del d["interval_stud"]
    elif args.method == "stud":
        del d["interval_vst"]
    if args.format == "json":
        _emit(args, _json({"command": "ci", **d}))
    elif args.format == "csv":
        header = ["p", "q", "n", "conf_level", "rho_hat", "se", "se_log", "method", "lower", "upper",
                  "bandwidth_p", "bandwidth_q", "g_p", "g_q"]
        rows = []
        for m in ("vst", "stud"):
            if f"interval_{m}" in d:
                lo, hi = d[f"interval_{m}"]
                diag = d["diagnostics"]
                rows.append([d["p"], d["q"], d["n"], d["conf_level"], d["rho_hat"], d["se"], d["se_log"],
                             m, lo, hi, diag["bandwidth_p"], diag["bandwidth_q"], diag["g_p"], diag["g_q"]])
        _emit(args, _csv(header, rows))
    else:
        diag = d["diagnostics"]
        lines = [
            f"ratio x_{args.p:g}/x_{args.q:g}   n = {d['n']}",
            f"rho_hat     {_fmt(d['rho_hat'])}",
            f"SE          {_fmt(d['se'])}   (log scale {_fmt(d['se_log'])})",
        ]
        pct = _fmt(100 * args.conf)
        if "interval_vst" in d:
            lines.append(f"VST  {pct}%   {_interval(d['interval_vst'])}")
        if "interval_stud" in d:
            lines.append(f"Stud {pct}%   {_interval(d['interval_stud'])}")
        lines.append(
            f"bandwidths  p: {_fmt(diag['bandwidth_p'])}  q: {_fmt(diag['bandwidth_q'])}   "
            f"g_hat  p: {_fmt(diag['g_p'])}  q: {_fmt(diag['g_q'])}"
        )
        _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_compare(args):
    sx = read_values(args.file_x, args.column)
    sy = read_values(args.file_y, args.column)
    conf = 1.0 - args.alpha if args.alpha is not None else args.conf
    res = compare_ratios(sx, sy, _pair(args), conf, _bandwidth(args))
    d = res.as_dict()
    if args.format == "json":
        _emit(args, _json({"command": "compare", "p": args.p, "q": args.q,
                           "n_x": sx.n, "n_y": sy.n, **d}))
    elif args.format == "csv":
        keys = ["theta_diff", "ratio_of_ratios", "se_diff", "z_stat", "rho_x", "rho_y",
                "se_log_x", "se_log_y", "level", "reject"]
        header = ["p", "q", "n_x", "n_y", *keys, "log_lower", "log_upper", "ratio_lower", "ratio_upper"]
        row = [args.p, args.q, sx.n, sy.n, *(d[k] for k in keys), *d["interval_log"], *d["interval_ratio"]]
        _emit(args, _csv(header, [row]))
    else:
        lines = [
            f"rho_x = {_fmt(d['rho_x'])} (n={sx.n}, SE log {_fmt(d['se_log_x'])})   "
            f"rho_y = {_fmt(d['rho_y'])} (n={sy.n}, SE log {_fmt(d['se_log_y'])})",
            f"ln rho_x - ln rho_y = {_fmt(d['theta_diff'])}   SE {_fmt(d['se_diff'])}   z = {_fmt(d['z_stat'])}",
            f"{_fmt(100 * (1 - d['level']))}% interval, log scale   {_interval(d['interval_log'])}",
            f"{_fmt(100 * (1 - d['level']))}% interval, rho_x/rho_y {_interval(d['interval_ratio'])}",
            f"{'reject' if d['reject'] else 'do not reject'} equality at level {_fmt(d['level'])}",
        ]
        _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_simulate(args):
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {args.config}: {exc}") from None
    cfg = CoverageConfig.from_json(text)
    if args.workers is not None:
        cfg.workers = args.workers

    def progress(done, total):
        print(f"\rchunks {done}/{total}", end="", file=sys.stderr, flush=True)
        if done == total:
            print(file=sys.stderr)

    result = run(cfg, progress=None if args.quiet else progress)
    if args.format == "json":
        rows = []
        for r in result.rows:
            d = {c: getattr(r, c) for c in ("family", "params", "epsilon", "n", "m", "p", "q", "method",
                                            "reps", "cp", "mean_width", "degenerate_count", "true_rho",
                                            "seed", "median_width", "degenerate_reasons")}
            rows.append({k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()})
        _emit(args, _json({"command": "simulate", "rows": rows}))
    else:
        _emit(args, result.to_csv())
    log.info("simulation finished in %.2fs", result.runtime)
    return 0


def cmd_reconstruct(args):
    column = args.year_column
    if column.isdigit():
        column = f"count_{column}"
    source = args.table if args.table else shipped_table_path().read_text()
    table = parse_table(source, count_column=column, household_sample_size=args.household_sample_size)
    policy = ReconstructionPolicy(
        truncate_to=(args.truncate_lower, args.truncate_upper),
        within_bin=args.within_bin,
        seed=args.seed,
    )
    s = reconstruct(table, policy)
    gamma = fit_gamma_mom(s)
    ratios = {f"{round(100 * p)}/{round(100 * q)}": estimate_ratio(s, QuantilePair(p, q)) for p, q in KEY_RATIOS}
    if args.out:
        Path(args.out).write_text("".join(f"{float(v)!r}\n" for v in s.values))
    summary = {
        "command": "reconstruct",
        "column": column,
        "n": s.n,
        "expected_n": reconstruction_size(table, policy),
        "gamma_shape": gamma.shape,
        "gamma_scale": gamma.scale,
        "ratios": ratios,
        "seed": args.seed,
        "sample_file": args.out,
    }
    if args.format == "json":
        sys.stdout.write(_json(summary))
    elif args.format == "csv":
        header = ["column", "n", "gamma_shape", "gamma_scale", *(f"ratio_{k}" for k in ratios)]
        sys.stdout.write(_csv(header, [[column, s.n, gamma.shape, gamma.scale, *ratios.values()]]))
    else:
        lines = [
            f"{column}: reconstructed n = {s.n}",
            f"gamma (method of moments): shape {_fmt(gamma.shape)}, scale {_fmt(gamma.scale)}",
            "ratios: " + "  ".join(f"{k} {_fmt(v)}" for k, v in ratios.items()),
        ]
        if args.out:
            lines.append(f"sample written to {args.out}")
        sys.stdout.write("\n".join(lines) + "\n")
    return 0


def parse_grid(text):
    """``start:stop:step`` (inclusive) or a comma-separated list of numbers."""
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            k = int(round((stop - start) / step))
            return [round(start + i * step, 12) for i in range(k + 1)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad grid specification {text!r}") from None


def cmd_influence(args):
    dist = AnalyticDistribution.from_spec(parse_distribution(args.dist))
    p_grid = parse_grid(args.p_grid)
    q_grid = parse_grid(args.q_grid) if args.q_grid else None
    z_grid = parse_grid(args.z_grid)
    rows = influence_surface(dist, p_grid, z_grid, q_grid)
    if args.format == "json":
        _emit(args, _json({"command": "influence", "distribution": dist.name,
                           "rows": [dict(zip(SURFACE_COLUMNS, r)) for r in rows]}))
    else:
        _emit(args, _csv(SURFACE_COLUMNS, rows))
    return 0


# -- parser

def _common(suppress=False):
    # global flags are accepted before or after the subcommand; the copy on
    # each subcommand must not overwrite a value given before it
    def d(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    g.add_argument("--format", choices=("text", "csv", "json"), default=d(None),
                   help="output format (default: text; CSV for simulate and influence)")
    g.add_argument("--conf", type=float, default=d(0.95), help="confidence level (default 0.95)")
    g.add_argument("--bandwidth-override", type=float, default=d(None),
                   help="fixed kernel bandwidth in (0, 1) instead of the lognormal-QOR rule")
    g.add_argument("--no-boundary-correct", action="store_true", default=d(False),
                   help="do not cap the bandwidth at p")
    g.add_argument("--upper-clamp", action="store_true", default=d(False),
                   help="also cap the bandwidth at 1 - p")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False),
                   help="log progress details to stderr")
    return common


def build_parser():
    common = _common(suppress=True)
    parser = argparse.ArgumentParser(
        prog="qratio",
        description="Distribution-free inference for ratios of quantiles.",
        parents=[_common()],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ci", parents=[common], help="interval for x_p / x_q from one sample")
    p.add_argument("data", help="file with one value per line (or a CSV, see --column)")
    p.add_argument("--p", type=float, required=True, help="numerator probability")
    p.add_argument("--q", type=float, required=True, help="denominator probability")
    p.add_argument("--method", choices=("vst", "stud", "both"), default="both",
                   help="which interval(s) to report (default both)")
    p.add_argument("--column", help="read this named column of a CSV file")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_ci, default_format="text")

    p = sub.add_parser("compare", parents=[common], help="compare ratios from two independent samples")
    p.add_argument("file_x", help="first sample, one value per line")
    p.add_argument("file_y", help="second sample, one value per line")
    p.add_argument("--p", type=float, required=True, help="numerator probability")
    p.add_argument("--q", type=float, required=True, help="denominator probability")
    p.add_argument("--alpha", type=float, default=None,
                   help="test level; overrides --conf with 1 - alpha (default 0.05)")
    p.add_argument("--column", help="read this named column of CSV files")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_compare, default_format="text")

    p = sub.add_parser("simulate", parents=[common], help="coverage simulation from a JSON config")
    p.add_argument("--config", required=True, help="CoverageConfig JSON file")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (0 = all cores)")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    p.set_defaults(func=cmd_simulate, default_format="csv")

    p = sub.add_parser("reconstruct", parents=[common], help="rebuild a sample from a binned income table")
    p.add_argument("--table", help="binned CSV (default: the shipped income table)")
    p.add_argument("--year-column", required=True, help="count column, e.g. count_2005 or 2005")
    p.add_argument("--household-sample-size", type=int, default=None,
                   help="number of sampled households (default: the table's meta line)")
    p.add_argument("--truncate-lower", type=float, default=0.0,
                   help="drop bins starting below this value (default 0)")
    p.add_argument("--truncate-upper", type=float, default=2000.0,
                   help="drop bins ending above this value (default 2000)")
    p.add_argument("--within-bin", choices=("stratified", "iid"), default="stratified",
                   help="uniform placement inside bins: stratified (default) or iid")
    p.add_argument("--out", help="write the reconstructed values here, one per line")
    p.set_defaults(func=cmd_reconstruct, default_format="text")

    p = sub.add_parser("influence", parents=[common], help="influence-function / ASV surface as CSV")
    p.add_argument("--dist", required=True, help="e.g. 'exponential:rate=1' or 'lognormal:mu=0,sigma=1'")
    p.add_argument("--p-grid", "--grid", dest="p_grid", required=True, help="start:stop:step or comma list")
    p.add_argument("--q-grid", help="as --p-grid; default pairs each p with q = 1 - p")
    p.add_argument("--z-grid", default="0", help="contamination points (default 0)")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_influence, default_format="csv")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if not 0.0 < args.conf < 1.0:
            raise InputError(f"--conf {args.conf} must lie in (0, 1)")
        return args.func(args)
    except InferenceError as exc:
        print(f"qratio: inference error: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except (InputError, ValueError) as exc:
        print(f"qratio: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
