"""Determinism coefficient from a coarse-grained vector field.

The embedding is covered by a grid of equal boxes. Each pass of the
trajectory through a box contributes the unit vector from the first point
of the pass to the first point after it; a box's field vector ``V_k`` is
the mean of its pass vectors. For ``n`` independent random unit vectors
``E|mean|^2 = 1/n`` in every dimension, so each box scores

    d_k = (|V_k|^2 - 1/n_k) / (1 - 1/n_k)

clamped to ``[0, 1]``, and ``kappa`` is the pass-weighted mean of ``d_k``
over boxes with at least ``n_min`` passes: 1 for perfectly aligned passes,
0 for directions no more coherent than a random walk.

Boxes are stored sparsely (a dense ``25**m`` array is out of reach for
``m >= 10``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_BINS = 25
DEFAULT_N_MIN = 2


class DeterminismError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    bins_per_axis: int
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dim(self):
        return len(self.lower)

    @property
    def width(self):
        return (self.upper - self.lower) / self.bins_per_axis


def _points(e):
    x = np.asarray(getattr(e, "vectors", e), dtype=float)
    return x[:, None] if x.ndim == 1 else x


def coarse_grain(e, bins_per_axis=DEFAULT_BINS):
    """Grid over the bounding box of ``e`` and the box id of every point.

    Returns ``(grid, ids)`` with ``ids`` an ``(n, m)`` integer array. A
    coordinate equal to the axis maximum lands in the last bin.
    """
    x = _points(e)
    if len(x) == 0:
        raise DeterminismError("empty embedding")
    if bins_per_axis < 2:
        raise DeterminismError("bins_per_axis must be >= 2")
    lower = x.min(axis=0)
    upper = x.max(axis=0)
    if np.any(upper <= lower):
        axes = np.flatnonzero(upper <= lower).tolist()
        raise DeterminismError(f"degenerate (constant) axis {axes}")
    grid = GridSpec(int(bins_per_axis), lower, upper)
    ids = np.floor((x - lower) / grid.width).astype(np.int64)
    np.clip(ids, 0, bins_per_axis - 1, out=ids)
    return grid, ids


@dataclass(frozen=True)
class BoxPass:
    box: tuple
    entry: int
    exit: int
    vector: np.ndarray


def collect_passes(e, ids, return_dropped=False):
    """Split the trajectory into maximal same-box runs.

    A run contributes a pass if the trajectory leaves the box afterwards;
    the final run is dropped, as are runs whose exit point coincides with
    their entry point (counted in the second return value when
    ``return_dropped`` is set).
    """
    x = _points(e)
    ids = np.asarray(ids)
    passes = []
    dropped = 0
    n = len(x)
    if n < 2:
        return (passes, dropped) if return_dropped else passes
    change = np.flatnonzero(np.any(ids[1:] != ids[:-1], axis=1)) + 1
    entries = np.concatenate(([0], change[:-1])) if len(change) else np.zeros(0, dtype=np.int64)
    for entry, exit_ in zip(entries, change):
        d = x[exit_] - x[entry]
        norm = np.sqrt(np.dot(d, d))
        if norm == 0:
            dropped += 1
            continue
        passes.append(BoxPass(tuple(int(v) for v in ids[entry]), int(entry), int(exit_), d / norm))
    return (passes, dropped) if return_dropped else passes


@dataclass(frozen=True)
class BoxStats:
    n: int
    mean: np.ndarray

    @property
    def norm(self):
        return float(np.sqrt(np.dot(self.mean, self.mean)))


def vector_field(passes) -> dict:
    """Mean pass vector per occupied box, keyed by box id."""
    sums = {}
    counts = {}
    for p in passes:
        if p.box in sums:
            sums[p.box] = sums[p.box] + p.vector
            counts[p.box] += 1
        else:
            sums[p.box] = np.array(p.vector, dtype=float)
            counts[p.box] = 1
    return {box: BoxStats(counts[box], sums[box] / counts[box]) for box in sorted(sums)}


def random_walk_baseline(n):
    """Expected squared norm of the mean of ``n`` independent random unit vectors."""
    return 1.0 / n


@dataclass(frozen=True)
class DeterminismResult:
    kappa: float
    kappa_raw: float  # weighted mean before clamping each box score
    boxes_used: int
    boxes_occupied: int
    passes_total: int
    passes_used: int
    n_min: int
    scores: dict = field(default_factory=dict, repr=False)
    bins_per_axis: int = 0
    m: int = 0
    tau: int = 0
    projection: str = "full"
    dropped_passes: int = 0

    def write_boxes(self, path, field_):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["box", "n_k", "norm_v", "d_k"])
            for box, stats in field_.items():
                score = self.scores.get(box)
                w.writerow([" ".join(map(str, box)), stats.n, repr(stats.norm),
                            "" if score is None else repr(score)])


def kappa(field_: dict, n_min=DEFAULT_N_MIN) -> DeterminismResult:
    """Pass-weighted determinism coefficient over boxes with ``n_k >= n_min``."""
    if n_min < 2:
        # a single pass has |V| = 1 and baseline 1: the score is 0/0
        raise DeterminismError("n_min must be >= 2")
    num = 0.0
    num_raw = 0.0
    den = 0
    scores = {}
    for box, st in field_.items():
        if st.n < n_min:
            continue
        b = random_walk_baseline(st.n)
        raw = (float(np.dot(st.mean, st.mean)) - b) / (1.0 - b)
        score = min(1.0, max(0.0, raw))
        scores[box] = score
        num += st.n * score
        num_raw += st.n * raw
        den += st.n
    if den == 0:
        raise DeterminismError(f"no box has at least {n_min} passes")
    total = sum(st.n for st in field_.values())
    return DeterminismResult(num / den, num_raw / den, len(scores), len(field_), total, den, n_min, scores)


def determinism(e, bins_per_axis=DEFAULT_BINS, n_min=DEFAULT_N_MIN, projection_2d=False):
    """Coarse-grain, collect passes and compute kappa for an embedding.

    Returns ``(result, field)``.
    """
    x = _points(e)
    projection = "full"
    if projection_2d:
        if x.shape[1] < 2:
            raise DeterminismError("2-D projection needs an embedding of dimension >= 2")
        x = x[:, :2]
        projection = "2d"
    _, ids = coarse_grain(x, bins_per_axis)
    passes, dropped = collect_passes(x, ids, return_dropped=True)
    field_ = vector_field(passes)
    res = replace(kappa(field_, n_min), bins_per_axis=int(bins_per_axis), m=x.shape[1],
                  tau=getattr(e, "tau", 0), projection=projection, dropped_passes=dropped)
    return res, field_
