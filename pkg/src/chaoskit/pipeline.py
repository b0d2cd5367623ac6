"""End-to-end analysis: ingest, lag, FNN dimension, MLE and kappa.

Each series is processed independently; a failing stage is recorded in
the series' ``errors`` and the remaining stages run when they can.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import determinism as det
from . import embedding as emb
from . import lyapunov as lya
from .config import ConfigError, PipelineConfig
from .series import ReturnSeries, SeriesError, load_csv, load_values_csv, log_returns

REPORT_COLUMNS = ("name", "n", "tau", "lag_found", "m", "fnn_converged", "lambda", "fit_k1", "fit_k2",
                  "r_squared", "mle_eps", "kappa", "kappa_raw", "boxes_used", "projection",
                  "rejected_rows", "flags", "errors")


@dataclass
class SeriesReport:
    name: str
    n: int = 0
    tau: Optional[int] = None
    lag_found: Optional[bool] = None
    m: Optional[int] = None
    fnn_converged: Optional[bool] = None
    lambda_: Optional[float] = None
    fit_k1: Optional[int] = None
    fit_k2: Optional[int] = None
    r_squared: Optional[float] = None
    mle_eps: Optional[float] = None
    kappa: Optional[float] = None
    kappa_raw: Optional[float] = None
    boxes_used: Optional[int] = None
    projection: Optional[str] = None
    rejected_rows: int = 0
    flags: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    # plot data, not part of the report row
    fnn_curve: object = field(default=None, repr=False)
    stretch_curve: object = field(default=None, repr=False)
    kappa_result: object = field(default=None, repr=False)
    box_field: object = field(default=None, repr=False)

    @property
    def failed(self):
        return bool(self.errors)

    def row(self):
        return {
            "name": self.name, "n": self.n, "tau": self.tau, "lag_found": self.lag_found, "m": self.m,
            "fnn_converged": self.fnn_converged, "lambda": self.lambda_, "fit_k1": self.fit_k1,
            "fit_k2": self.fit_k2, "r_squared": self.r_squared, "mle_eps": self.mle_eps,
            "kappa": self.kappa, "kappa_raw": self.kappa_raw, "boxes_used": self.boxes_used,
            "projection": self.projection, "rejected_rows": self.rejected_rows,
            "flags": list(self.flags), "errors": dict(self.errors),
        }


@dataclass
class PipelineResult:
    config: PipelineConfig
    series: list

    @property
    def exit_code(self):
        failed = sum(s.failed for s in self.series)
        if failed == 0:
            return 0
        return 2 if failed == len(self.series) else 3

    def ratio(self):
        """``lambda_a / lambda_b`` for the pair named by ``config.compare``, or None."""
        return compare_ratio(self.series, self.config.compare)


def series_name(path):
    return Path(path).stem


def safe_name(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def load_input(path, cfg: PipelineConfig) -> tuple:
    """``(ReturnSeries, rejected_rows)`` for one input file."""
    name = series_name(path)
    if cfg.input_kind == "series":
        return load_values_csv(path, value_column=cfg.value_column, label=name), 0
    prices = load_csv(path, date_column=cfg.date_column, price_column=cfg.price_column,
                      date_format=cfg.date_format, dayfirst=cfg.dayfirst, label=name)
    return log_returns(prices), prices.rejected


def analyse(z: ReturnSeries, cfg: PipelineConfig, name=None, rejected=0) -> SeriesReport:
    rep = SeriesReport(name or z.label, n=z.n, rejected_rows=rejected)
    x = z.values

    try:
        if cfg.tau is not None:
            rep.tau, rep.lag_found = int(cfg.tau), True
        else:
            lag = emb.estimate_lag(x, cfg.lag_method)
            rep.tau, rep.lag_found = lag.tau, lag.found
            if not lag.found:
                rep.flags.append("lag-not-found")
    except (emb.EmbeddingError, ValueError) as exc:
        rep.errors["lag"] = str(exc)
        return rep

    try:
        dim = emb.min_embedding_dim(x, rep.tau, r=cfg.fnn_r, sigma=cfg.fnn_sigma, theiler=cfg.fnn_theiler,
                                    fnn_star=cfg.fnn_star, m_max=cfg.m_max)
        rep.fnn_curve = dim.curve
        rep.fnn_converged = dim.converged
        rep.m = dim.m
        if not dim.converged:
            rep.flags.append("fnn-not-converged")
    except (emb.EmbeddingError, ValueError) as exc:
        rep.errors["fnn"] = str(exc)
    if cfg.m is not None:
        rep.m = int(cfg.m)
        rep.flags.append("m-override")
    if rep.m is None:
        return rep

    try:
        e = emb.embed(x, emb.EmbeddingParams(rep.m, rep.tau))
    except emb.EmbeddingError as exc:
        rep.errors["embed"] = str(exc)
        return rep

    try:
        curve = lya.stretching_factor(e, eps=cfg.mle_eps, theiler=cfg.mle_theiler,
                                      max_delta_n=cfg.max_delta_n, min_neighbors=cfg.min_neighbors,
                                      metric=cfg.mle_metric)
        rep.stretch_curve = curve
        rep.mle_eps = curve.eps
        if cfg.fit_k1 is not None:
            est = lya.fit_slope(curve, cfg.fit_k1, cfg.fit_k2)
        else:
            est = lya.auto_fit(curve, cfg.fit_window)
        rep.lambda_, rep.fit_k1, rep.fit_k2, rep.r_squared = est.lambda_, est.k1, est.k2, est.r_squared
        rep.flags.extend(est.flags)
    except (lya.LyapunovError, ValueError) as exc:
        rep.errors["mle"] = str(exc)

    try:
        res, box_field = det.determinism(e, cfg.bins_per_axis, cfg.n_min, projection_2d=cfg.projection == "2d")
        rep.kappa, rep.kappa_raw, rep.boxes_used = res.kappa, res.kappa_raw, res.boxes_used
        rep.projection = res.projection
        rep.kappa_result, rep.box_field = res, box_field
    except (det.DeterminismError, ValueError) as exc:
        rep.errors["kappa"] = str(exc)
    return rep


def _run_one(path, cfg):
    name = series_name(path)
    try:
        z, rejected = load_input(path, cfg)
    except (SeriesError, OSError, ValueError) as exc:
        return SeriesReport(name, errors={"ingest": str(exc)})
    return analyse(z, cfg, name, rejected)


def run(cfg: PipelineConfig) -> PipelineResult:
    """Analyse every input; results come back in input order whatever ``jobs`` is."""
    cfg.validate()
    if not cfg.inputs:
        raise ConfigError("no input series given")
    if cfg.jobs == 1:
        reports = [_run_one(p, cfg) for p in cfg.inputs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            reports = list(pool.map(lambda p: _run_one(p, cfg), cfg.inputs))
    return PipelineResult(cfg, reports)


def compare_ratio(reports, spec):
    """``lambda(a) / lambda(b)`` for ``spec = "a/b"``; None when not computable."""
    if not spec or "/" not in spec:
        return None
    a, b = (part.strip().lower() for part in spec.split("/", 1))
    lam = {r.name.lower(): r.lambda_ for r in reports}
    la, lb = lam.get(a), lam.get(b)
    if la is None or lb is None or lb == 0:
        return None
    return la / lb


# --- output ----------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(v)
    if isinstance(v, dict):
        return ";".join(f"{k}: {msg}" for k, msg in v.items())
    return str(v)


def report_csv(result: PipelineResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for rep in result.series:
        row = rep.row()
        w.writerow([_cell(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def report_json(result: PipelineResult) -> str:
    doc = {
        "config": result.config.to_dict(),
        "series": [{k: _json_safe(v) for k, v in rep.row().items()} for rep in result.series],
        "compare": {"pair": result.config.compare, "lambda_ratio": result.ratio()},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_outputs(result: PipelineResult, out_dir=None) -> list:
    """Write the report, the effective config and per-series plot data.

    Returns the written paths. Contents depend only on config and inputs.
    """
    cfg = result.config
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if cfg.output_format == "json":
        path = out / "report.json"
        path.write_text(report_json(result))
    else:
        path = out / "report.csv"
        path.write_text(report_csv(result))
    written.append(path)
    path = out / "effective_config.txt"
    path.write_text(cfg.to_text())
    written.append(path)
    for rep in result.series:
        stem = safe_name(rep.name)
        if rep.fnn_curve is not None:
            path = out / f"fnn_{stem}.csv"
            rep.fnn_curve.write_plot_data(path)
            written.append(path)
        if rep.stretch_curve is not None:
            path = out / f"stretch_{stem}.csv"
            rep.stretch_curve.write_plot_data(path)
            written.append(path)
        if cfg.dump_boxes and rep.kappa_result is not None:
            path = out / f"boxes_{stem}.csv"
            rep.kappa_result.write_boxes(path, rep.box_field)
            written.append(path)
    return written


def summary_table(result: PipelineResult) -> str:
    """Plain-text table: series, delay, dimension, exponent and kappa."""
    header = f"{'Series':<20} {'tau':>4} {'m':>4} {'lambda':>12} {'kappa':>10}  notes"
    lines = [header, "-" * len(header)]

    def num(v, fmt):
        return "-" if v is None else format(v, fmt)

    for rep in result.series:
        notes = ", ".join(list(rep.flags) + [f"{k} failed" for k in rep.errors])
        lines.append(f"{rep.name:<20} {num(rep.tau, 'd'):>4} {num(rep.m, 'd'):>4} "
                     f"{num(rep.lambda_, '.8f'):>12} {num(rep.kappa, '.6f'):>10}  {notes}".rstrip())
    ratio = result.ratio()
    if ratio is not None:
        lines.append(f"lambda ratio {result.config.compare}: {ratio:.4f}")
    return "\n".join(lines) + "\n"
