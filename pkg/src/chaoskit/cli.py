"""``chaoskit`` command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 every series
failed, 3 some series failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

import numpy as np

from . import determinism as det
from . import embedding as emb
from . import lyapunov as lya
from . import oracles, pipeline
from .config import ConfigError, PipelineConfig, _format, field_kinds, parse_value
from .series import SeriesError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ALL_FAILED = 2
EXIT_PARTIAL = 3

_CONFIG_HELP = {
    "inputs": "comma-separated input files (positional inputs are appended)",
    "input_kind": "prices (date/price CSV, log returns taken) or series (values used as is)",
    "date_column": "date column name",
    "price_column": "price column name",
    "value_column": "value column name for input_kind=series",
    "date_format": "strptime format for dates; auto means ISO 8601",
    "dayfirst": "parse ambiguous dates as day first",
    "tau": "delay; auto estimates it with lag_method",
    "lag_method": f"one of {', '.join(emb.LAG_METHODS)}",
    "m": "embedding dimension; auto uses the FNN minimum",
    "fnn_r": "FNN distance ratio threshold r",
    "fnn_sigma": "FNN scale sigma; auto uses the series standard deviation",
    "fnn_theiler": "FNN Theiler window; auto uses (m-1)*tau",
    "fnn_star": "FNN fraction below which m is accepted",
    "m_max": "largest embedding dimension tried",
    "mle_eps": "neighbourhood radius; auto starts at 0.1*sigma and grows by sqrt(2)",
    "mle_theiler": "MLE Theiler window; auto uses (m-1)*tau",
    "max_delta_n": "length of the stretching curve",
    "min_neighbors": "neighbours a reference needs to count",
    "fit_window": "window length for the automatic slope fit",
    "fit_k1": "fixed fit start (with fit_k2); auto picks the window",
    "fit_k2": "fixed fit end (with fit_k1)",
    "mle_metric": "max or euclidean",
    "bins_per_axis": "grid bins per axis for kappa",
    "n_min": "passes a box needs to enter kappa",
    "projection": "full or 2d (first two delay coordinates)",
    "dump_boxes": "write boxes_<name>.csv per series",
    "output_dir": "directory for report and plot data",
    "output_format": "csv or json",
    "jobs": "series analysed concurrently",
    "compare": "pair a/b whose lambda ratio is reported",
}


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return _format(v)


def _add_config_flags(p):
    defaults = PipelineConfig()
    kinds = field_kinds()
    for f in fields(PipelineConfig):
        flags = [f"--{f.name.replace('_', '-')}"]
        if "_" in f.name:
            flags.append(f"--{f.name}")
        typ = kinds[f.name][0]
        metavar = "LIST" if kinds[f.name][2] else typ.__name__.upper()
        p.add_argument(*flags, dest=f"cfg_{f.name}", metavar=metavar, default=None,
                       help=f"{_CONFIG_HELP[f.name]} (default: {_fmt(getattr(defaults, f.name))})")


def _add_input_flags(p):
    d = PipelineConfig()
    p.add_argument("input", help="input CSV file")
    p.add_argument("--input-kind", choices=("prices", "series"), default=d.input_kind,
                   help=f"{_CONFIG_HELP['input_kind']} (default: {d.input_kind})")
    p.add_argument("--date-column", default=d.date_column, help=f"(default: {d.date_column})")
    p.add_argument("--price-column", default=d.price_column, help=f"(default: {d.price_column})")
    p.add_argument("--value-column", default=d.value_column, help=f"(default: {d.value_column})")
    p.add_argument("--date-format", default=None, help="strptime format (default: ISO 8601)")
    p.add_argument("--dayfirst", action="store_true", help="day-first dates (default: false)")


def _add_embedding_flags(p):
    p.add_argument("--m", type=int, default=None, help="embedding dimension (default: FNN minimum)")
    p.add_argument("--tau", type=int, default=None,
                   help=f"delay (default: estimated with {emb.DEFAULT_LAG_METHOD})")


def build_parser():
    parser = ArgumentParser(prog="chaoskit", description="Chaos diagnostics for scalar time series.",
                            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("pipeline", help="full analysis of one or more series")
    p.add_argument("paths", nargs="*", help="input files (added to inputs)")
    p.add_argument("--config", help="key = value configuration file (default: none)")
    p.add_argument("--dump-config", action="store_true",
                   help="print the effective configuration and exit (default: false)")
    _add_config_flags(p)

    p = sub.add_parser("lag", help="estimate the delay")
    _add_input_flags(p)
    p.add_argument("--method", choices=emb.LAG_METHODS, default=emb.DEFAULT_LAG_METHOD,
                   help=f"(default: {emb.DEFAULT_LAG_METHOD})")
    p.add_argument("--tau", type=int, default=1, help="delay returned by the fixed method (default: 1)")
    p.add_argument("--max-lag", type=int, default=None, help="largest lag searched (default: n // 10)")

    p = sub.add_parser("fnn", help="false-nearest-neighbour curve and minimum dimension")
    _add_input_flags(p)
    p.add_argument("--tau", type=int, default=None,
                   help=f"delay (default: estimated with {emb.DEFAULT_LAG_METHOD})")
    p.add_argument("--r", type=float, default=emb.DEFAULT_R, help=f"(default: {emb.DEFAULT_R})")
    p.add_argument("--sigma", type=float, default=None, help="(default: series standard deviation)")
    p.add_argument("--theiler", type=int, default=None, help="(default: (m-1)*tau)")
    p.add_argument("--fnn-star", type=float, default=emb.DEFAULT_FNN_STAR,
                   help=f"(default: {emb.DEFAULT_FNN_STAR})")
    p.add_argument("--m-max", type=int, default=emb.DEFAULT_M_MAX, help=f"(default: {emb.DEFAULT_M_MAX})")
    p.add_argument("--csv", help="write the curve CSV and its .meta.json here (default: none)")

    p = sub.add_parser("mle", help="stretching curve and maximal Lyapunov exponent")
    _add_input_flags(p)
    _add_embedding_flags(p)
    p.add_argument("--eps", type=float, default=None, help="radius (default: 0.1*sigma, grown by sqrt(2))")
    p.add_argument("--theiler", type=int, default=None, help="(default: (m-1)*tau)")
    p.add_argument("--max-delta-n", type=int, default=lya.DEFAULT_MAX_DELTA_N,
                   help=f"(default: {lya.DEFAULT_MAX_DELTA_N})")
    p.add_argument("--min-neighbors", type=int, default=lya.DEFAULT_MIN_NEIGHBORS,
                   help=f"(default: {lya.DEFAULT_MIN_NEIGHBORS})")
    p.add_argument("--fit-window", type=int, default=lya.DEFAULT_FIT_WINDOW,
                   help=f"(default: {lya.DEFAULT_FIT_WINDOW})")
    p.add_argument("--k1", type=int, default=None, help="fit start (default: automatic window)")
    p.add_argument("--k2", type=int, default=None, help="fit end (default: automatic window)")
    p.add_argument("--metric", choices=("max", "euclidean"), default="max", help="(default: max)")
    p.add_argument("--csv", help="write the stretching curve CSV here (default: none)")

    p = sub.add_parser("determinism", help="determinism coefficient kappa")
    _add_input_flags(p)
    _add_embedding_flags(p)
    p.add_argument("--bins", type=int, default=det.DEFAULT_BINS, help=f"(default: {det.DEFAULT_BINS})")
    p.add_argument("--n-min", type=int, default=det.DEFAULT_N_MIN, help=f"(default: {det.DEFAULT_N_MIN})")
    p.add_argument("--projection-2d", action="store_true",
                   help="use the first two delay coordinates (default: false)")
    p.add_argument("--boxes", help="write per-box statistics CSV here (default: none)")

    p = sub.add_parser("synth", help="generate a synthetic series")
    p.add_argument("family", choices=oracles.FAMILIES)
    p.add_argument("--length", type=int, default=10000, help="(default: 10000)")
    p.add_argument("--seed", type=int, default=0, help="(default: 0)")
    p.add_argument("--transient", type=int, default=0, help="(default: 0)")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="family parameter, repeatable (default: family defaults)")
    p.add_argument("--output", help="output CSV with a value column (default: stdout)")
    return parser


# --- helpers ---------------------------------------------------------------

def _load(args):
    cfg = PipelineConfig(input_kind=args.input_kind, date_column=args.date_column,
                         price_column=args.price_column, value_column=args.value_column,
                         date_format=args.date_format, dayfirst=args.dayfirst)
    z, _ = pipeline.load_input(args.input, cfg)
    return z.values


def _tau(x, tau):
    return tau if tau is not None else emb.estimate_lag(x).tau


def _embedding(x, args):
    tau = _tau(x, args.tau)
    m = args.m if args.m is not None else emb.min_embedding_dim(x, tau).m
    return emb.embed(x, emb.EmbeddingParams(m, tau))


def _emit(doc):
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _float(v):
    return None if v is None or not np.isfinite(v) else float(v)


# --- commands --------------------------------------------------------------

def cmd_pipeline(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    kinds = field_kinds()
    overrides = {}
    for f in fields(PipelineConfig):
        raw = getattr(args, f"cfg_{f.name}")
        if raw is not None:
            overrides[f.name] = raw
    for key, raw in overrides.items():
        setattr(cfg, key, parse_value(kinds[key], raw, key))
    cfg.inputs = list(cfg.inputs) + list(args.paths)
    cfg.validate()
    if args.dump_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    result = pipeline.run(cfg)
    pipeline.write_outputs(result)
    sys.stdout.write(pipeline.summary_table(result))
    for rep in result.series:
        for stage, msg in rep.errors.items():
            print(f"{rep.name}: {stage}: {msg}", file=sys.stderr)
    return result.exit_code


def cmd_lag(args):
    x = _load(args)
    est = emb.estimate_lag(x, args.method, tau=args.tau, max_lag=args.max_lag)
    _emit({"method": est.method, "tau": est.tau, "found": est.found})
    return EXIT_OK


def cmd_fnn(args):
    x = _load(args)
    tau = _tau(x, args.tau)
    res = emb.min_embedding_dim(x, tau, r=args.r, sigma=args.sigma, theiler=args.theiler,
                                fnn_star=args.fnn_star, m_max=args.m_max)
    if args.csv:
        res.curve.write_plot_data(args.csv)
    _emit({"m_min": res.m, "converged": res.converged, "tau": tau, "r": args.r,
           "sigma": res.curve.sigma, "fnn_star": args.fnn_star,
           "curve": [{"m": rec.m, "fraction": rec.fraction, "numerator": rec.numerator,
                      "denominator": rec.denominator} for rec in res.curve.records]})
    return EXIT_OK


def cmd_mle(args):
    if (args.k1 is None) != (args.k2 is None):
        raise ConfigError("--k1 and --k2 go together")
    if args.k1 is not None and args.k1 >= args.k2:
        raise ConfigError(f"--k1 ({args.k1}) must be smaller than --k2 ({args.k2})")
    x = _load(args)
    e = _embedding(x, args)
    curve = lya.stretching_factor(e, eps=args.eps, theiler=args.theiler, max_delta_n=args.max_delta_n,
                                  min_neighbors=args.min_neighbors, metric=args.metric)
    est = lya.fit_slope(curve, args.k1, args.k2) if args.k1 is not None else lya.auto_fit(curve, args.fit_window)
    if args.csv:
        curve.write_plot_data(args.csv)
    _emit({"lambda": est.lambda_, "k1": est.k1, "k2": est.k2, "r_squared": est.r_squared,
           "flags": list(est.flags), "m": e.m, "tau": e.tau, "eps": curve.eps,
           "theiler": curve.theiler, "references": curve.n_references,
           "curve": [_float(v) for v in curve.s]})
    return EXIT_OK


def cmd_determinism(args):
    x = _load(args)
    e = _embedding(x, args)
    res, field_ = det.determinism(e, args.bins, args.n_min, projection_2d=args.projection_2d)
    if args.boxes:
        res.write_boxes(args.boxes, field_)
    _emit({"kappa": res.kappa, "kappa_raw": res.kappa_raw, "boxes_used": res.boxes_used,
           "boxes_occupied": res.boxes_occupied, "passes_total": res.passes_total,
           "passes_used": res.passes_used, "n_min": res.n_min, "bins_per_axis": res.bins_per_axis,
           "m": e.m, "tau": e.tau, "projection": res.projection})
    return EXIT_OK


def _param_value(text):
    try:
        return float(text)
    except ValueError:
        return text


def cmd_synth(args):
    params = {}
    for item in args.param:
        if "=" not in item:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = _param_value(value.strip())
    z = oracles.generate(oracles.MapSpec(args.family, args.length, params, args.seed, args.transient))
    text = "value\n" + "".join(f"{v!r}\n" for v in z.tolist())
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"pipeline": cmd_pipeline, "lag": cmd_lag, "fnn": cmd_fnn, "mle": cmd_mle,
            "determinism": cmd_determinism, "synth": cmd_synth}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"chaoskit: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SeriesError, OSError, ValueError) as exc:
        # single-series commands: the one series failed
        print(f"chaoskit: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED


if __name__ == "__main__":
    sys.exit(main())
