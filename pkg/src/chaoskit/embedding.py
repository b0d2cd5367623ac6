"""Delay-coordinate reconstruction, lag selection and false nearest neighbours."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .neighbors import NeighborIndex
from .series import ReturnSeries

DEFAULT_R = 10.0
DEFAULT_FNN_STAR = 0.005
DEFAULT_M_MAX = 30
DEFAULT_LAG_METHOD = "autocorr-e"
LAG_METHODS = ("autocorr-e", "autocorr-zero", "fixed")


class EmbeddingError(ValueError):
    pass


def _values(z):
    return np.asarray(getattr(z, "values", z), dtype=float)


def default_theiler(m, tau):
    return (m - 1) * tau


@dataclass(frozen=True)
class EmbeddingParams:
    m: int
    tau: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise EmbeddingError(f"embedding dimension must be a positive integer, got {self.m}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise EmbeddingError(f"delay must be a positive integer, got {self.tau}")

    @property
    def span(self):
        return (self.m - 1) * self.tau


@dataclass(frozen=True)
class DelayEmbedding:
    """Row ``i`` is ``(z[i], z[i + tau], ..., z[i + (m-1) tau])``."""

    params: EmbeddingParams
    vectors: np.ndarray
    source: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.vectors)

    @property
    def m(self):
        return self.params.m

    @property
    def tau(self):
        return self.params.tau

    @property
    def sigma(self):
        return float(np.std(self.source))


def embed(z, params: EmbeddingParams) -> DelayEmbedding:
    x = _values(z)
    n = len(x)
    count = n - params.span
    if count < 1:
        raise EmbeddingError(f"(m-1)*tau = {params.span} exhausts a series of length {n}")
    vectors = np.empty((count, params.m))
    for j in range(params.m):
        vectors[:, j] = x[j * params.tau: j * params.tau + count]
    vectors.setflags(write=False)
    return DelayEmbedding(params, vectors, x)


def project(e: DelayEmbedding, dims=2) -> DelayEmbedding:
    """Keep only the first ``dims`` delay coordinates."""
    if dims > e.m:
        raise EmbeddingError(f"cannot project a {e.m}-dimensional embedding onto {dims} axes")
    params = EmbeddingParams(dims, e.tau)
    return DelayEmbedding(params, np.ascontiguousarray(e.vectors[:, :dims]), e.source)


# --- lag -------------------------------------------------------------------

@dataclass(frozen=True)
class LagEstimate:
    method: str
    tau: int
    curve: np.ndarray = field(repr=False)  # autocorrelation at lags 0..len-1
    found: bool = True


def autocorrelation(z, max_lag):
    x = _values(z)
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0:
        raise EmbeddingError("autocorrelation undefined for a constant series")
    n = len(x)
    return np.array([np.dot(x[: n - lag], x[lag:]) / denom for lag in range(max_lag + 1)])


def estimate_lag(z, method=DEFAULT_LAG_METHOD, tau=1, max_lag=None) -> LagEstimate:
    """Pick a delay from the sample autocorrelation.

    ``autocorr-e`` returns the first lag where the autocorrelation drops
    below ``1/e``; ``autocorr-zero`` the first lag where it is ``<= 0``.
    Lags are searched up to ``n // 10``; when none qualifies the result is
    ``tau = 1`` with ``found = False``. ``fixed`` returns ``tau`` unchanged.
    """
    if method not in LAG_METHODS:
        raise EmbeddingError(f"unknown lag method {method!r}")
    x = _values(z)
    if len(x) < 10:
        raise EmbeddingError("lag estimation needs at least 10 observations")
    if max_lag is None:
        max_lag = max(1, len(x) // 10)
    acf = autocorrelation(x, max_lag)
    if method == "fixed":
        return LagEstimate(method, int(tau), acf)
    if method == "autocorr-e":
        hits = np.flatnonzero(acf[1:] < np.exp(-1.0))
    else:
        hits = np.flatnonzero(acf[1:] <= 0.0)
    if len(hits) == 0:
        return LagEstimate(method, 1, acf, found=False)
    return LagEstimate(method, int(hits[0]) + 1, acf)


# --- false nearest neighbours ----------------------------------------------

@dataclass(frozen=True)
class FnnRecord:
    m: int
    numerator: int
    denominator: int
    ties: int = 0

    @property
    def fraction(self) -> Optional[float]:
        """``numerator / denominator``, or ``None`` when no pair qualified."""
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator


@dataclass(frozen=True)
class FnnCurve:
    records: tuple
    r: float
    sigma: float
    tau: int

    def fractions(self):
        return [rec.fraction for rec in self.records]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "fraction", "numerator", "denominator"])
            for rec in self.records:
                frac = "" if rec.fraction is None else repr(rec.fraction)
                w.writerow([rec.m, frac, rec.numerator, rec.denominator])

    def plot_meta(self):
        return {"x": "m", "y": "fraction", "xlabel": "embedding dimension m",
                "ylabel": "fraction of false nearest neighbours", "log_y": True,
                "r": self.r, "sigma": self.sigma, "tau": self.tau}

    def write_plot_data(self, path):
        path = Path(path)
        self.to_csv(path)
        path.with_suffix(".meta.json").write_text(json.dumps(self.plot_meta(), indent=2, sort_keys=True) + "\n")


def fnn_fraction(z, m, tau=1, r=DEFAULT_R, sigma=None, theiler=None, workers=1) -> FnnRecord:
    """False-nearest-neighbour count for dimension ``m`` under the max norm.

    Points ``i`` range over the first ``n - m*tau`` delay vectors (those
    with an image in ``m + 1`` dimensions); the neighbour ``k(i)`` is the
    closest admissible vector among the same set. A pair counts in the
    denominator when its ``m``-distance is ``<= sigma / r`` and in the
    numerator when, in addition, the ``(m+1)``-distance is at least ``r``
    times larger. Pairs at ``m``-distance zero are skipped (``ties``).
    """
    x = _values(z)
    if r <= 1:
        raise EmbeddingError("r must exceed 1")
    if sigma is None:
        sigma = float(np.std(x))
    if sigma <= 0:
        raise EmbeddingError("sigma must be positive")
    if theiler is None:
        theiler = default_theiler(m, tau)
    count = len(x) - m * tau
    if count < 2:
        raise EmbeddingError(f"series too short for m={m}, tau={tau}")
    vectors = embed(x, EmbeddingParams(m, tau)).vectors[:count]
    index = NeighborIndex(vectors)
    # only pairs within sigma / r enter the statistic, so the search is bounded there
    ks, dm = index.nearest_all(theiler, workers=workers, max_distance=sigma / r)
    has = ks >= 0
    ks = np.where(has, ks, 0)
    extra = np.abs(x[np.arange(count) + m * tau] - x[ks + m * tau])
    dm1 = np.maximum(dm, extra)

    ties = has & (dm == 0)
    close = has & (dm <= sigma / r) & ~ties
    with np.errstate(divide="ignore", invalid="ignore"):
        false = close & (dm1 / np.where(ties, 1.0, dm) >= r)
    return FnnRecord(m, int(false.sum()), int(close.sum()), int(ties.sum()))


@dataclass(frozen=True)
class EmbeddingDimension:
    m: int
    converged: bool
    curve: FnnCurve


def min_embedding_dim(z, tau=1, r=DEFAULT_R, sigma=None, theiler=None,
                      fnn_star=DEFAULT_FNN_STAR, m_max=DEFAULT_M_MAX, workers=1,
                      full_curve=True) -> EmbeddingDimension:
    """Smallest ``m <= m_max`` whose FNN fraction is defined and below ``fnn_star``.

    ``theiler=None`` uses ``(m - 1) * tau`` for each dimension. When no
    dimension qualifies, ``m_max`` is returned with ``converged=False``.
    With ``full_curve=False`` the scan stops at the first qualifying ``m``.
    """
    if m_max < 1:
        raise EmbeddingError("m_max must be >= 1")
    x = _values(z)
    if sigma is None:
        sigma = float(np.std(x))
    records = []
    m_min = None
    for m in range(1, m_max + 1):
        if len(x) - m * tau < 2:
            break
        rec = fnn_fraction(x, m, tau, r, sigma, theiler, workers=workers)
        records.append(rec)
        if m_min is None and rec.fraction is not None and rec.fraction < fnn_star:
            m_min = m
            if not full_curve:
                break
    curve = FnnCurve(tuple(records), float(r), float(sigma), int(tau))
    if m_min is None:
        return EmbeddingDimension(m_max, False, curve)
    return EmbeddingDimension(m_min, True, curve)
