"""Nearest-neighbour and fixed-radius queries with temporal exclusion.

A k-d tree proposes candidates; every reported distance is recomputed
exactly as ``max_j |x_ij - x_kj|`` (or the Euclidean norm), so results are
bit-identical to an exhaustive scan. In high dimension the tree degrades
to a scan anyway, so fixed-radius queries under the max norm use a
compiled exhaustive scan with early exit instead. A candidate ``k`` is admissible for
query ``i`` only when ``|i - k| > theiler``; ties go to the smallest ``k``.
"""

from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np
from scipy.spatial import cKDTree

METRICS = {"max": np.inf, "euclidean": 2.0}

# relative slack on tree radii; exact filtering happens afterwards
_SLACK = 1e-9
_CHUNK = 4_000_000
# from this dimension on, max-norm radius queries scan instead of using the tree
SCAN_DIM = 8
_FIRST_K = 16


class Neighbor(NamedTuple):
    k: int
    distance: float


class NoNeighborError(ValueError):
    pass


def _exact(points, i, ks, metric):
    diff = points[ks] - points[i]
    if metric == "max":
        return np.max(np.abs(diff), axis=-1)
    return np.sqrt(np.sum(diff * diff, axis=-1))


@numba.njit(cache=True)
def _scan_within(x, queries, eps, theiler):
    """Max-norm radius search by exhaustive scan: flat ``(offsets, ks, ds)``."""
    n, m = x.shape
    cap = 1024
    ks = np.empty(cap, dtype=np.int64)
    ds = np.empty(cap)
    offsets = np.zeros(len(queries) + 1, dtype=np.int64)
    used = 0
    for q in range(len(queries)):
        i = queries[q]
        for k in range(n):
            if abs(i - k) <= theiler:
                continue
            d = 0.0
            for c in range(m):
                a = abs(x[k, c] - x[i, c])
                if a > d:
                    d = a
                    if d > eps:
                        break
            if d <= eps:
                if used == cap:
                    cap *= 2
                    ks2 = np.empty(cap, dtype=np.int64)
                    ds2 = np.empty(cap)
                    ks2[:used] = ks[:used]
                    ds2[:used] = ds[:used]
                    ks = ks2
                    ds = ds2
                ks[used] = k
                ds[used] = d
                used += 1
        offsets[q + 1] = used
    return offsets, ks[:used], ds[:used]


@numba.njit(cache=True)
def _scan_count(x, queries, eps, theiler, need):
    """Per query, number of non-coincident admissible points within eps, capped at ``need``."""
    n, m = x.shape
    out = np.zeros(len(queries), dtype=np.int64)
    for q in range(len(queries)):
        i = queries[q]
        found = 0
        for k in range(n):
            if abs(i - k) <= theiler:
                continue
            d = 0.0
            for c in range(m):
                a = abs(x[k, c] - x[i, c])
                if a > d:
                    d = a
                    if d > eps:
                        break
            if 0.0 < d <= eps:
                found += 1
                if found == need:
                    break
        out[q] = found
    return out


class NeighborIndex:
    """Search structure over a fixed set of points (rows)."""

    def __init__(self, points, metric="max"):
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}")
        pts = np.ascontiguousarray(getattr(points, "vectors", points), dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("cannot index an empty point set")
        self.points = pts
        self.metric = metric
        self._p = METRICS[metric]
        self.tree = cKDTree(pts)

    def __len__(self):
        return len(self.points)

    @property
    def _scan(self):
        return self.metric == "max" and self.points.shape[1] >= SCAN_DIM

    def _n_admissible(self, i, theiler):
        n = len(self.points)
        lo, hi = max(i - theiler, 0), min(i + theiler, n - 1)
        return n - (hi - lo + 1)

    def distance(self, i, k):
        return float(_exact(self.points, i, np.array([k]), self.metric)[0])

    def nearest(self, i, theiler=0) -> Neighbor:
        """Closest admissible point to point ``i``."""
        n = len(self.points)
        if not 0 <= i < n:
            raise IndexError(i)
        if self._n_admissible(i, theiler) <= 0:
            raise NoNeighborError(f"no admissible neighbour for point {i} (theiler={theiler})")
        kk = min(n, 2 * theiler + 2)
        while True:
            d, idx = self.tree.query(self.points[i], k=kk, p=self._p)
            d, idx = np.atleast_1d(d), np.atleast_1d(idx)
            res = self._pick(i, theiler, idx, d, exhaustive=kk == n)
            if res is not None:
                return res
            kk = min(n, 2 * kk)

    def _pick(self, i, theiler, idx, tree_d, exhaustive):
        adm = np.abs(idx - i) > theiler
        if not adm.any():
            return None
        cand = idx[adm]
        dist = _exact(self.points, i, cand, self.metric)
        dmin = dist.min()
        if not (exhaustive or dmin < tree_d[-1] * (1.0 - 1e-12)):
            # ties may continue past the k-th tree neighbour
            cand = self._ball(i, dmin)
            cand = cand[np.abs(cand - i) > theiler]
            dist = _exact(self.points, i, cand, self.metric)
            dmin = dist.min()
        k = int(cand[dist == dmin].min())
        return Neighbor(k, float(dmin))

    def _ball(self, i, radius):
        r = radius * (1.0 + _SLACK) + 1e-300
        return np.asarray(self.tree.query_ball_point(self.points[i], r, p=self._p), dtype=np.intp)

    def within(self, i, eps, theiler=0) -> list[Neighbor]:
        """All admissible points at distance ``<= eps`` from ``i``, sorted by index."""
        ks, ds = self._within(i, eps, theiler)
        return [Neighbor(int(k), float(d)) for k, d in zip(ks, ds)]

    def _within(self, i, eps, theiler, cand=None):
        if eps <= 0:
            raise ValueError("eps must be positive")
        if cand is None:
            if np.isinf(eps):
                cand = np.arange(len(self.points))
            else:
                cand = self._ball(i, eps)
        cand = np.sort(np.asarray(cand, dtype=np.intp))
        cand = cand[np.abs(cand - i) > theiler]
        dist = _exact(self.points, i, cand, self.metric)
        keep = dist <= eps
        return cand[keep], dist[keep]

    def within_all(self, eps, theiler=0, indices=None, workers=1):
        """Fixed-radius search for many query points.

        Returns a list of ``(ks, distances)`` array pairs, one per query,
        each sorted by ``k``.
        """
        indices = np.arange(len(self.points)) if indices is None else np.asarray(indices)
        if len(indices) == 0:
            return []
        if np.isinf(eps):
            every = np.arange(len(self.points))
            return [self._within(int(i), eps, theiler, every) for i in indices]
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self._scan:
            offsets, ks, ds = _scan_within(self.points, indices.astype(np.int64), float(eps), int(theiler))
            return [(ks[a:b].astype(np.intp), ds[a:b]) for a, b in zip(offsets[:-1], offsets[1:])]
        r = eps * (1.0 + _SLACK) + 1e-300
        balls = self.tree.query_ball_point(self.points[indices], r, p=self._p, workers=workers)
        return [self._within(int(i), eps, theiler, b) for i, b in zip(indices, balls)]

    def count_nonzero_within(self, eps, theiler=0, need=1, indices=None, workers=1):
        """Per query, admissible points at distance in ``(0, eps]``, capped at ``need``."""
        indices = np.arange(len(self.points)) if indices is None else np.asarray(indices)
        if self._scan and np.isfinite(eps):
            if eps <= 0:
                raise ValueError("eps must be positive")
            return _scan_count(self.points, indices.astype(np.int64), float(eps), int(theiler), int(need))
        res = self.within_all(eps, theiler, indices, workers)
        return np.array([min(need, int(np.count_nonzero(ds > 0))) for _, ds in res], dtype=np.int64)

    def nearest_all(self, theiler=0, indices=None, workers=1, max_distance=None):
        """Nearest admissible neighbour for many query points.

        Returns ``(ks, distances)`` arrays aligned with ``indices``. With
        ``max_distance`` set, queries whose nearest admissible neighbour is
        farther than it get ``k = -1`` and distance ``inf``. The result
        does not depend on ``workers``.
        """
        n = len(self.points)
        indices = np.arange(n) if indices is None else np.asarray(indices, dtype=np.intp)
        out_k = np.full(len(indices), -1, dtype=np.intp)
        out_d = np.full(len(indices), np.inf)
        if len(indices) == 0:
            return out_k, out_d
        bound = np.inf if max_distance is None else max_distance * (1.0 + _SLACK) + 1e-300
        limit = np.inf if max_distance is None else max_distance
        # 2w + 2 candidates always include an admissible one; most queries
        # resolve far earlier, so start small and double for the rest
        cap = min(n, 2 * theiler + 2)
        kk = min(cap, _FIRST_K)
        pending = np.arange(len(indices))
        while len(pending):
            last = kk == cap
            pending = self._nearest_round(indices, pending, kk, last, theiler, bound, limit,
                                          max_distance, out_k, out_d, workers)
            kk = min(cap, 2 * kk)
        return out_k, out_d

    def _nearest_round(self, indices, pending, kk, last, theiler, bound, limit, max_distance,
                       out_k, out_d, workers):
        n = len(self.points)
        tree_d, idx = self.tree.query(self.points[indices[pending]], k=kk, p=self._p, workers=workers,
                                      distance_upper_bound=bound)
        tree_d = tree_d.reshape(len(pending), kk)
        idx = idx.reshape(len(pending), kk)
        unresolved = []
        m = self.points.shape[1]
        step = max(1, _CHUNK // (kk * m))
        for lo in range(0, len(pending), step):
            rows = pending[lo:lo + step]
            q = indices[rows]
            ii = idx[lo:lo + step]
            found = ii < n
            safe = np.where(found, ii, 0)
            diff = self.points[safe] - self.points[q][:, None, :]
            if self.metric == "max":
                dist = np.max(np.abs(diff), axis=-1)
            else:
                dist = np.sqrt(np.sum(diff * diff, axis=-1))
            ok = found & (np.abs(ii - q[:, None]) > theiler) & (dist <= limit)
            dist = np.where(ok, dist, np.inf)
            dmin = dist.min(axis=1)
            # the list is complete if the tree ran out of points inside the bound,
            # otherwise the minimum must sit strictly inside the k-th tree distance
            complete = (kk == n) | ~found[:, -1]
            fast = complete | (np.isfinite(dmin) & (dmin < tree_d[lo:lo + step, -1] * (1.0 - 1e-12)))
            best = np.where(dist == dmin[:, None], ii, np.iinfo(np.intp).max).min(axis=1)
            hit = np.isfinite(dmin)
            out_k[rows[fast]] = np.where(hit, best, -1)[fast]
            out_d[rows[fast]] = dmin[fast]
            for j in np.flatnonzero(~fast):
                if not last:
                    unresolved.append(rows[j])
                    continue
                k, d = self._nearest_bounded(int(q[j]), theiler, max_distance)
                out_k[rows[j]] = k
                out_d[rows[j]] = d
        return np.array(unresolved, dtype=np.intp)

    def _nearest_bounded(self, i, theiler, max_distance):
        if max_distance is None:
            if self._n_admissible(i, theiler) <= 0:
                return -1, np.inf
            nb = self.nearest(i, theiler)
            return nb.k, nb.distance
        ks, ds = self._within(i, max_distance, theiler)
        if len(ks) == 0:
            return -1, np.inf
        dmin = ds.min()
        return int(ks[ds == dmin].min()), float(dmin)


def build_index(e, metric="max") -> NeighborIndex:
    """Index the vectors of a delay embedding (or any ``(n, m)`` array)."""
    return NeighborIndex(e, metric=metric)


def nearest(idx: NeighborIndex, i, theiler=0) -> Neighbor:
    return idx.nearest(i, theiler)


def within(idx: NeighborIndex, i, eps, theiler=0) -> list[Neighbor]:
    return idx.within(i, eps, theiler)
