"""Maximal Lyapunov exponent from the stretching-factor curve.

For every reference vector ``i`` with a full future window, the neighbours
within ``eps`` are followed forward; ``s_i(dn)`` is the log of their mean
distance from the reference trajectory after ``dn`` steps, and the curve
``s(dn)`` averages ``s_i`` over references. The exponent is the slope of
the curve over its initial linear region.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .embedding import DelayEmbedding, default_theiler
from .neighbors import NeighborIndex

logger = logging.getLogger(__name__)

DEFAULT_EPS_FRACTION = 0.1
EPS_GROWTH = math.sqrt(2.0)
EPS_COVERAGE = 0.5
DEFAULT_MAX_DELTA_N = 40
DEFAULT_MIN_NEIGHBORS = 1
DEFAULT_FIT_WINDOW = 4
MAX_EPS_STEPS = 60


class LyapunovError(ValueError):
    pass


@dataclass(frozen=True)
class StretchingCurve:
    delta_n: np.ndarray
    s: np.ndarray
    references: np.ndarray  # references contributing to each sample
    m: int
    tau: int
    eps: float
    theiler: int
    max_delta_n: int
    n_references: int
    zero_pairs: int = 0
    metric: str = "max"

    def __len__(self):
        return len(self.delta_n)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta_n", "s"])
            for dn, s in zip(self.delta_n, self.s):
                w.writerow([int(dn), repr(float(s))])

    def plot_meta(self):
        return {"x": "delta_n", "y": "s", "xlabel": "time steps ahead",
                "ylabel": "log stretching factor", "log_y": False,
                "m": self.m, "tau": self.tau, "eps": self.eps, "theiler": self.theiler,
                "references": self.n_references}

    def write_plot_data(self, path):
        path = Path(path)
        self.to_csv(path)
        path.with_suffix(".meta.json").write_text(json.dumps(self.plot_meta(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class MleEstimate:
    lambda_: float
    k1: int
    k2: int
    r_squared: float
    curve: StretchingCurve = field(repr=False)
    flags: tuple = ()

    @property
    def fit_range(self):
        return self.k1, self.k2


def _neighbour_lists(index, eps, theiler, workers):
    """Neighbours within eps with zero-distance pairs removed.

    Returns ``(lists, zero_count)``.
    """
    lists = []
    zeros = 0
    for ks, ds in index.within_all(eps, theiler, workers=workers):
        nz = ds > 0
        zeros += int(len(ds) - np.count_nonzero(nz))
        lists.append(ks[nz])
    return lists, zeros


def _select_eps(index, sigma, theiler, min_neighbors, workers):
    count = len(index)
    eps = DEFAULT_EPS_FRACTION * sigma
    for _ in range(MAX_EPS_STEPS):
        have = index.count_nonzero_within(eps, theiler, min_neighbors, workers=workers)
        if np.count_nonzero(have >= min_neighbors) >= EPS_COVERAGE * count:
            lists, zeros = _neighbour_lists(index, eps, theiler, workers)
            return eps, lists, zeros
        eps *= EPS_GROWTH
    raise LyapunovError("no radius found with enough neighbours")


def choose_eps(e: DelayEmbedding, theiler=None, max_delta_n=DEFAULT_MAX_DELTA_N,
               min_neighbors=DEFAULT_MIN_NEIGHBORS, metric="max", workers=1):
    """Smallest radius ``0.1 * sigma * sqrt(2)**k`` giving enough neighbours.

    "Enough" means at least half of the candidate references have
    ``min_neighbors`` non-coincident admissible neighbours.
    """
    theiler = default_theiler(e.m, e.tau) if theiler is None else theiler
    index = _reference_index(e, max_delta_n, metric)
    return _select_eps(index, _sigma(e), theiler, min_neighbors, workers)[0]


def _sigma(e):
    sigma = e.sigma
    if sigma <= 0:
        raise LyapunovError("constant series: no neighbourhood scale")
    return sigma


def _reference_index(e, max_delta_n, metric):
    count = len(e) - max_delta_n
    if count < 2:
        raise LyapunovError("embedding too short for the requested max_delta_n")
    return NeighborIndex(e.vectors[:count], metric=metric)


@numba.njit(cache=True)
def _accumulate(x, offsets, neighbours, refs_idx, max_delta_n, use_max):
    """Sum of per-reference log mean distances, references in index order."""
    steps = max_delta_n + 1
    dim = x.shape[1]
    total = np.zeros(steps)
    counts = np.zeros(steps, dtype=np.int64)
    dsum = np.zeros(steps)
    dcnt = np.zeros(steps, dtype=np.int64)
    zeros = 0
    for r in range(len(refs_idx)):
        i = refs_idx[r]
        dsum[:] = 0.0
        dcnt[:] = 0
        for p in range(offsets[r], offsets[r + 1]):
            j = neighbours[p]
            for t in range(steps):
                d = 0.0
                for c in range(dim):
                    diff = x[j + t, c] - x[i + t, c]
                    if use_max:
                        a = abs(diff)
                        if a > d:
                            d = a
                    else:
                        d += diff * diff
                if not use_max:
                    d = np.sqrt(d)
                if d > 0.0:
                    dsum[t] += d
                    dcnt[t] += 1
                else:
                    zeros += 1
        for t in range(steps):
            if dcnt[t] > 0:
                total[t] += np.log(dsum[t] / dcnt[t])
                counts[t] += 1
    return total, counts, zeros


def stretching_factor(e: DelayEmbedding, eps=None, theiler=None, max_delta_n=DEFAULT_MAX_DELTA_N,
                      min_neighbors=DEFAULT_MIN_NEIGHBORS, metric="max", workers=1) -> StretchingCurve:
    """Mean log divergence of initially close trajectory segments.

    References and neighbours are restricted to the first
    ``len(e) - max_delta_n`` vectors so every trajectory can be followed
    for ``max_delta_n`` steps. Neighbours at distance exactly zero are
    dropped, and a zero distance reached later is left out of that step's
    mean. ``eps=None`` selects the radius with :func:`choose_eps`.

    ``workers`` only parallelises the neighbour search; references are
    reduced serially in index order, so the curve is bitwise independent
    of it.
    """
    if max_delta_n < 1:
        raise LyapunovError("max_delta_n must be >= 1")
    if min_neighbors < 1:
        raise LyapunovError("min_neighbors must be >= 1")
    theiler = default_theiler(e.m, e.tau) if theiler is None else int(theiler)
    index = _reference_index(e, max_delta_n, metric)
    if eps is None:
        eps, lists, zeros = _select_eps(index, _sigma(e), theiler, min_neighbors, workers)
    else:
        if eps <= 0:
            raise LyapunovError("eps must be positive")
        lists, zeros = _neighbour_lists(index, eps, theiler, workers)

    kept = [i for i, ks in enumerate(lists) if len(ks) >= min_neighbors]
    if kept:
        offsets = np.concatenate(([0], np.cumsum([len(lists[i]) for i in kept]))).astype(np.int64)
        neighbours = np.concatenate([lists[i] for i in kept]).astype(np.int64)
    else:
        offsets = np.zeros(1, dtype=np.int64)
        neighbours = np.zeros(0, dtype=np.int64)
    x = np.ascontiguousarray(e.vectors, dtype=float)
    total, refs, later_zeros = _accumulate(x, offsets, neighbours, np.array(kept, dtype=np.int64),
                                           int(max_delta_n), metric == "max")
    zeros += int(later_zeros)
    steps = np.arange(max_delta_n + 1)

    if not kept or np.any(refs == 0):
        raise LyapunovError(f"no reference point has {min_neighbors} neighbour(s) within eps={eps:g}; "
                            "try a larger eps")
    return StretchingCurve(steps, total / refs, refs, e.m, e.tau, float(eps), theiler,
                           int(max_delta_n), len(kept), zeros, metric)


def _ols(x, y):
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    dy = y - ym
    sxx = float(np.dot(dx, dx))
    slope = float(np.dot(dx, dy)) / sxx
    ss_tot = float(np.dot(dy, dy))
    resid = dy - slope * dx
    ss_res = float(np.dot(resid, resid))
    if ss_tot == 0:
        return slope, 0.0, False
    return slope, min(1.0, max(0.0, 1.0 - ss_res / ss_tot)), True


def fit_slope(curve: StretchingCurve, k1, k2) -> MleEstimate:
    """Least-squares slope of ``s`` against ``delta_n`` on ``[k1, k2]``."""
    k1, k2 = int(k1), int(k2)
    if not 0 <= k1 < k2 <= curve.max_delta_n:
        raise LyapunovError(f"invalid fit range [{k1}, {k2}] for a curve up to {curve.max_delta_n}")
    if k2 - k1 + 1 < 3:
        raise LyapunovError("fit range needs at least 3 points")
    sel = (curve.delta_n >= k1) & (curve.delta_n <= k2)
    slope, r2, defined = _ols(curve.delta_n[sel].astype(float), curve.s[sel])
    flags = () if defined else ("r2-undefined",)
    return MleEstimate(slope, k1, k2, r2, curve, flags)


def auto_fit(curve: StretchingCurve, window_len=DEFAULT_FIT_WINDOW) -> MleEstimate:
    """Pick the fit window automatically.

    Every window of ``window_len`` consecutive samples with ``delta_n >= 1``
    is fitted; the one with the largest r^2 among positive slopes wins
    (earliest on ties). Without any positive slope the best-r^2 window is
    returned with the ``non-positive-slope`` flag.
    """
    if window_len < 3:
        raise LyapunovError("window_len must be >= 3")
    if window_len > curve.max_delta_n:
        raise LyapunovError(f"curve too short for a window of {window_len}")
    fits = [fit_slope(curve, k1, k1 + window_len - 1)
            for k1 in range(1, curve.max_delta_n - window_len + 2)]
    positive = [f for f in fits if f.lambda_ > 0]
    pool = positive or fits
    best = max(pool, key=lambda f: f.r_squared)  # max keeps the first maximum
    if not positive:
        return MleEstimate(best.lambda_, best.k1, best.k2, best.r_squared, curve,
                           best.flags + ("non-positive-slope",))
    return best
