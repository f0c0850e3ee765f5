"""Command-line interface.

Subcommands: ``simulate`` (model -> dataset CSV), ``testfns`` (dataset ->
test-function curves), ``fbplot`` (curves -> SVG + JSON summary),
``ranktest`` (dataset -> test report JSON), ``reproduce`` (rejection-rate
tables).  Exit codes: 0 success, 2 configuration/usage error, 3 numerical
failure.  Every stochastic subcommand requires an explicit --seed, and the
resolved configuration is echoed into each output's metadata sidecar.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    SpaceTimeDataset,
    deseason_monthly,
    read_dataset_csv,
    read_dataset_long_csv,
    write_dataset_csv,
)
from .errors import NUMERICAL_ERRORS, ConfigError
from .estimate import all_pairs_test_fns, read_curves_csv, write_curves_csv
from .fbplot import functional_boxplot, write_fbplot
from .models import spec_from_json
from .ranktest import RankTestConfig, rank_test, write_report_json
from .reproduce import SCALES, TABLES, grid_sites, run_table
from .simulate import BlockSampler, ExactSampler

log = logging.getLogger("stcov")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stcov",
        description="Visualize and test separability/full symmetry of space-time covariances.",
    )
    parser.add_argument("--version", action="version", version=f"stcov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stochastic: bool):
        p.add_argument("--config", type=Path, help="JSON file with defaults for this subcommand")
        p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument(
            "--seed",
            type=int,
            default=None,
            help="integer seed" + (" (required)" if stochastic else " (unused)"),
        )

    p = sub.add_parser("simulate", help="simulate a Gaussian space-time dataset to CSV")
    common(p, stochastic=True)
    p.add_argument("--model", help='model JSON, e.g. \'{"family":"gneiting_sep","params":{"beta":0.5}}\'')
    p.add_argument("--model-file", type=Path, help="path to a model JSON file")
    p.add_argument("--sites", default="4x4", help="grid spec AxB on the unit square (default 4x4)")
    p.add_argument("--sites-file", type=Path, help="CSV of x,y site coordinates (no header)")
    p.add_argument("--p", type=int, default=2000, help="number of time points (default 2000)")
    p.add_argument("--block", type=int, default=100, help="block length (default 100)")
    p.add_argument("--exact", action="store_true", help="use the exact joint sampler")
    p.add_argument("--out", type=Path, help="output CSV path (default <out-dir>/dataset.csv)")

    p = sub.add_parser("testfns", help="estimate test-function curves from a dataset")
    common(p, stochastic=False)
    p.add_argument("--data", type=Path, help="wide-format dataset CSV")
    p.add_argument("--long-format", action="store_true", help="input is long format site,x,y,t,value[,class]")
    p.add_argument("--class-filter", help="keep only long-format rows with this class label")
    p.add_argument("--month-file", type=Path, help="file with one month label per time point; subtract monthly means")
    p.add_argument("--kind", required=True, choices=["separability", "symmetry"])
    p.add_argument("--max-lag", type=int, default=10)
    p.add_argument("--c0-mode", default="pair", choices=["pair", "global"])
    p.add_argument("--model", help="model JSON: emit analytic curves for this model instead of estimating")
    p.add_argument("--sites", default="4x4", help="grid AxB for --model analytic curves (default 4x4)")
    p.add_argument("--out", type=Path, help="output CSV path (default <out-dir>/curves.csv)")

    p = sub.add_parser("fbplot", help="functional boxplot of a curve set (SVG + JSON)")
    common(p, stochastic=False)
    p.add_argument("--curves", type=Path, required=True, help="curve-set CSV from testfns")
    p.add_argument("--factor", type=float, default=1.5, help="fence inflation factor (default 1.5)")
    p.add_argument("--title", default="")
    p.add_argument("--xlabel", default="temporal lag")
    p.add_argument("--ylabel", default="test function")
    p.add_argument("--no-zero-line", action="store_true")
    p.add_argument("--out", type=Path, help="output SVG path (default <out-dir>/fbplot.svg)")

    p = sub.add_parser("ranktest", help="depth-rank bootstrap test on a dataset")
    common(p, stochastic=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--long-format", action="store_true")
    p.add_argument("--class-filter")
    p.add_argument("--month-file", type=Path)
    p.add_argument("--kind", required=True, choices=["separability", "symmetry"])
    p.add_argument("--max-lag", type=int, default=10)
    p.add_argument("--c0-mode", default="pair", choices=["pair", "global"])
    p.add_argument("--b", type=int, default=100, help="bootstrap replicates (default 100)")
    p.add_argument("--m", type=int, default=1, help="null datasets pooled (default 1)")
    p.add_argument("--r", type=int, default=1, help="reference datasets pooled (default 1)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--h0-horizon", type=int, help="symmetry-null truncation lag (default max-lag)")
    p.add_argument("--h0-block-len", type=int, help="symmetry-null simulation block length")
    p.add_argument("--frozen-reference", action="store_true",
                   help="reuse the first null/reference sets across bootstrap replicates (cheaper)")
    p.add_argument("--progress", action="store_true", help="progress reporting on stderr")
    p.add_argument("--out", type=Path, help="report JSON path (default <out-dir>/ranktest.json)")

    p = sub.add_parser("reproduce", help="reproduce a rejection-rate table")
    common(p, stochastic=True)
    p.add_argument("--table", required=True, choices=sorted(TABLES))
    p.add_argument("--scale", default="paper", choices=sorted(SCALES))
    p.add_argument("--runs", type=int, help="runs per cell (default from scale)")
    p.add_argument("--b", type=int, default=100)
    p.add_argument("--p", type=int, help="series length (default from scale)")
    p.add_argument("--max-lag", type=int, default=10)
    p.add_argument("--no-resume", action="store_true", help="ignore previous progress files")
    p.add_argument("--quiet", action="store_true")
    return parser


def _apply_config_file(argv: list[str], args: argparse.Namespace, parser) -> argparse.Namespace:
    """Re-parse with defaults from --config so explicit flags still win."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--config {args.config}: {exc}") from exc
    if not isinstance(conf, dict):
        raise ConfigError(f"--config {args.config}: expected a JSON object")
    ns = argparse.Namespace()
    unknown = [k for k in conf if not hasattr(args, k.replace("-", "_"))]
    if unknown:
        raise ConfigError(f"--config {args.config}: unknown keys {unknown}")
    for k, v in conf.items():
        setattr(ns, k.replace("-", "_"), Path(v) if k in ("data", "out", "curves") else v)
    merged = parser.parse_args(argv, namespace=ns)
    return merged


def _args_meta(args: argparse.Namespace) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _require_seed(args):
    if args.seed is None:
        raise ConfigError("--seed is required for stochastic subcommands (no silent entropy)")


def _resolve_out(args, attr, default_name) -> Path:
    out = getattr(args, attr, None)
    if out is None:
        out = args.out_dir / default_name
    out = Path(out)
    if not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _parse_grid(spec: str) -> np.ndarray:
    try:
        nx, ny = (int(v) for v in spec.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--sites expects AxB (e.g. 4x4), got {spec!r}") from exc
    if nx < 1 or ny < 1:
        raise ConfigError(f"--sites grid must be positive, got {spec!r}")
    return grid_sites(nx, ny)


def _load_dataset(args) -> SpaceTimeDataset:
    if args.data is None:
        raise ConfigError("--data is required")
    if not Path(args.data).exists():
        raise ConfigError(f"--data {args.data}: file not found")
    if getattr(args, "long_format", False):
        ds = read_dataset_long_csv(args.data, class_filter=getattr(args, "class_filter", None))
    else:
        if getattr(args, "class_filter", None):
            raise ConfigError("--class-filter needs --long-format input")
        ds = read_dataset_csv(args.data)
    month_file = getattr(args, "month_file", None)
    if month_file:
        if not Path(month_file).exists():
            raise ConfigError(f"--month-file {month_file}: file not found")
        months = np.loadtxt(month_file, dtype=int, ndmin=1)
        ds = deseason_monthly(ds, months)
    return ds


def cmd_simulate(args) -> int:
    _require_seed(args)
    if args.model and args.model_file:
        raise ConfigError("give either --model or --model-file, not both")
    if args.model_file:
        if not args.model_file.exists():
            raise ConfigError(f"--model-file {args.model_file}: file not found")
        model_json = args.model_file.read_text()
    else:
        model_json = args.model or '{"family":"gneiting_sep","params":{"beta":0.5}}'
    spec = spec_from_json(model_json)
    if args.sites_file:
        if not args.sites_file.exists():
            raise ConfigError(f"--sites-file {args.sites_file}: file not found")
        sites = np.loadtxt(args.sites_file, delimiter=",", ndmin=2)
    else:
        sites = _parse_grid(args.sites)
    if args.p < 2:
        raise ConfigError(f"--p must be >= 2, got {args.p}")
    out = _resolve_out(args, "out", "dataset.csv")
    if args.exact:
        ds = ExactSampler(spec, sites, args.p).dataset(args.seed)
    else:
        if args.p % args.block != 0:
            raise ConfigError(f"--p {args.p} is not divisible by --block {args.block}")
        ds = BlockSampler(spec, sites, block_len=args.block).dataset(args.p, args.seed)
    ds.meta["cli_config"] = _args_meta(args)
    write_dataset_csv(ds, out)
    print(f"wrote {out} ({ds.n_sites} sites x {ds.n_times} times)")
    return 0


def cmd_testfns(args) -> int:
    if args.model and args.data:
        raise ConfigError("give either --data (estimated curves) or --model (analytic curves)")
    if args.model:
        cs = _analytic_curves(args)
    else:
        ds = _load_dataset(args)
        cs = all_pairs_test_fns(ds, args.kind, args.max_lag, c0_mode=args.c0_mode)
    cs.meta["cli_config"] = _args_meta(args)
    out = _resolve_out(args, "out", "curves.csv")
    write_curves_csv(cs, out)
    print(f"wrote {out} ({cs.n_curves} curves, lags {cs.lags[0]}..{cs.lags[-1]})")
    return 0


def _analytic_curves(args):
    from .estimate import CurveSet
    from .models import analytic_sep_test_fn, analytic_sym_test_fn

    spec = spec_from_json(args.model)
    sites = _parse_grid(args.sites)
    n = sites.shape[0]
    curves, pairs, lag_vecs = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            h = sites[j] - sites[i]
            if args.kind == "separability":
                curves.append(analytic_sep_test_fn(spec, h, args.max_lag))
            else:
                curves.append(analytic_sym_test_fn(spec, h, args.max_lag))
            pairs.append((i, j))
            lag_vecs.append(h)
    lags = (
        np.arange(args.max_lag + 1) if args.kind == "separability" else np.arange(1, args.max_lag + 1)
    )
    return CurveSet(
        kind=args.kind,
        lags=lags,
        curves=np.array(curves),
        pairs=np.array(pairs),
        lag_vectors=np.array(lag_vecs),
        meta={"analytic": True, "model": spec.to_json_dict(), "sites": "4x4 unit-square grid"},
    )


def cmd_fbplot(args) -> int:
    if not args.curves.exists():
        raise ConfigError(f"--curves {args.curves}: file not found")
    cs = read_curves_csv(args.curves)
    summary = functional_boxplot(cs, factor=args.factor)
    out = _resolve_out(args, "out", "fbplot.svg")
    options = {
        "title": args.title,
        "xlabel": args.xlabel,
        "ylabel": args.ylabel,
        "zero_line": not args.no_zero_line,
    }
    write_fbplot(summary, cs, out, options)
    print(
        f"wrote {out} (median curve {summary.median_index}, "
        f"{len(summary.outlier_indices)} outliers, median_max_abs={summary.median_max_abs:.4g})"
    )
    return 0


def cmd_ranktest(args) -> int:
    _require_seed(args)
    ds = _load_dataset(args)
    cfg = RankTestConfig(
        kind=args.kind,
        seed=args.seed,
        max_lag=args.max_lag,
        m=args.m,
        r=args.r,
        b=args.b,
        alpha=args.alpha,
        c0_mode=args.c0_mode,
        h0_horizon=args.h0_horizon,
        h0_block_len=args.h0_block_len,
        frozen_reference=args.frozen_reference,
        threads=args.threads,
        progress=args.progress or args.b >= 1000,
    )
    report = rank_test(ds, cfg)
    report.config["cli_config"] = _args_meta(args)
    out = _resolve_out(args, "out", "ranktest.json")
    write_report_json(report, out)
    print(report.one_line_summary())
    print(f"wrote {out}")
    return 0


def cmd_reproduce(args) -> int:
    _require_seed(args)
    rates = run_table(
        table=args.table,
        out_dir=args.out_dir,
        seed=args.seed,
        scale=args.scale,
        runs=args.runs,
        b=args.b,
        p=args.p,
        threads=args.threads,
        max_lag=args.max_lag,
        resume=not args.no_resume,
        progress=not args.quiet,
    )
    for cell, per_alpha in rates.items():
        levels = ", ".join(f"alpha={a:g}: {v:.2f}" for a, v in per_alpha.items())
        print(f"{args.table} {cell}: {levels}")
    print(f"wrote {Path(args.out_dir) / (args.table + '.csv')}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "testfns": cmd_testfns,
    "fbplot": cmd_fbplot,
    "ranktest": cmd_ranktest,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(argv, args, parser)
        if args.out_dir is not None:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
