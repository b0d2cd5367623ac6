"""Synthetic dynamical systems and brute-force references.

These are the independent checks the estimators are validated against:
maps whose maximal Lyapunov exponent can be computed from the derivative
along the orbit, and exhaustive-scan neighbour searches.

Random series use ``numpy.random.default_rng(seed)`` (PCG64), so a given
seed yields the same series on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("logistic", "henon", "noise", "sine", "randomwalk")
DIVERGENCE_BOUND = 1e10


class DivergenceError(ValueError):
    """Raised when an orbit leaves the bounded regime."""


@dataclass(frozen=True)
class MapSpec:
    """Recipe for a synthetic series.

    ``params`` holds family-specific values:

    * logistic: ``r`` (default 4.0), ``x0`` (drawn from ``seed`` if absent)
    * henon: ``a`` (1.4), ``b`` (0.3), ``x0``/``y0`` (0.0)
    * noise: ``dist`` ("gaussian" or "uniform")
    * sine: ``period`` (50.0), ``amplitude`` (1.0), ``phase`` (0.0)
    * randomwalk: gaussian unit-variance steps
    """

    family: str
    length: int
    params: dict = field(default_factory=dict)
    seed: int = 0
    transient: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown map family {self.family!r}; expected one of {FAMILIES}")
        if self.transient < 0:
            raise ValueError("transient must be >= 0")
        if self.length <= self.transient:
            raise ValueError("length must exceed transient")

    def param(self, name, default=None):
        return self.params.get(name, default)


def _logistic_x0(spec):
    x0 = spec.param("x0")
    if x0 is None:
        x0 = np.random.default_rng(spec.seed).uniform(0.05, 0.95)
    return float(x0)


def _check_logistic(r, x0):
    if not 0.0 < r <= 4.0:
        raise ValueError(f"logistic r must lie in (0, 4], got {r}")
    if not 0.0 <= x0 <= 1.0:
        raise ValueError(f"logistic x0 must lie in [0, 1], got {x0}")


def logistic_orbit(r, x0, steps):
    x = np.empty(steps)
    xi = x0
    for t in range(steps):
        x[t] = xi
        xi = r * xi * (1.0 - xi)
    return x


def henon_orbit(a, b, x0, y0, steps):
    out = np.empty((steps, 2))
    x, y = x0, y0
    for t in range(steps):
        if abs(x) > DIVERGENCE_BOUND or abs(y) > DIVERGENCE_BOUND:
            raise DivergenceError(f"Henon orbit diverged at step {t} (a={a}, b={b})")
        out[t, 0] = x
        out[t, 1] = y
        x, y = 1.0 - a * x * x + y, b * x
    return out


def generate(spec: MapSpec) -> np.ndarray:
    """Generate the scalar series described by ``spec``.

    The first ``spec.transient`` values are discarded, so the result has
    ``spec.length - spec.transient`` entries.
    """
    n = spec.length
    if spec.family == "logistic":
        r = float(spec.param("r", 4.0))
        x0 = _logistic_x0(spec)
        _check_logistic(r, x0)
        z = logistic_orbit(r, x0, n)
    elif spec.family == "henon":
        a = float(spec.param("a", 1.4))
        b = float(spec.param("b", 0.3))
        z = henon_orbit(a, b, float(spec.param("x0", 0.0)), float(spec.param("y0", 0.0)), n)[:, 0]
    elif spec.family == "noise":
        rng = np.random.default_rng(spec.seed)
        dist = spec.param("dist", "gaussian")
        if dist == "gaussian":
            z = rng.standard_normal(n)
        elif dist == "uniform":
            z = rng.random(n)
        else:
            raise ValueError(f"unknown noise distribution {dist!r}")
    elif spec.family == "sine":
        period = float(spec.param("period", 50.0))
        if period <= 0:
            raise ValueError("sine period must be positive")
        # fmod is exact, so an integer period repeats bit for bit
        t = np.fmod(np.arange(n, dtype=float), period)
        z = float(spec.param("amplitude", 1.0)) * np.sin(2.0 * np.pi * t / period + float(spec.param("phase", 0.0)))
    else:  # randomwalk
        rng = np.random.default_rng(spec.seed)
        z = np.cumsum(rng.standard_normal(n))

    z = z[spec.transient:]
    if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > DIVERGENCE_BOUND:
        raise DivergenceError(f"{spec.family} orbit diverged")
    return z


def jacobian_mle(spec: MapSpec, return_skipped=False):
    """Maximal Lyapunov exponent from the map's derivative along the orbit.

    Logistic: mean of ``ln|r - 2 r x_t|``; terms where the derivative is
    exactly zero are skipped and counted. Henon: growth rate of a tangent
    vector pushed through the 2x2 Jacobians, renormalised every step.
    Both are per-step rates over ``length - transient`` steps.
    """
    steps = spec.length - spec.transient
    skipped = 0
    if spec.family == "logistic":
        r = float(spec.param("r", 4.0))
        x0 = _logistic_x0(spec)
        _check_logistic(r, x0)
        x = logistic_orbit(r, x0, spec.length)[spec.transient:]
        deriv = np.abs(r - 2.0 * r * x)
        nonzero = deriv > 0
        skipped = int(steps - np.count_nonzero(nonzero))
        lam = float(np.mean(np.log(deriv[nonzero])))
    elif spec.family == "henon":
        a = float(spec.param("a", 1.4))
        b = float(spec.param("b", 0.3))
        orbit = henon_orbit(a, b, float(spec.param("x0", 0.0)), float(spec.param("y0", 0.0)), spec.length)
        xs = orbit[spec.transient:, 0]
        u0, u1 = 1.0, 0.0
        total = 0.0
        for x in xs:
            # J = [[-2 a x, 1], [b, 0]]
            u0, u1 = -2.0 * a * x * u0 + u1, b * u0
            norm = np.hypot(u0, u1)
            total += np.log(norm)
            u0 /= norm
            u1 /= norm
        lam = total / steps
    else:
        raise ValueError(f"no known derivative for family {spec.family!r}")
    if return_skipped:
        return lam, skipped
    return lam


def _points(e):
    return np.asarray(getattr(e, "vectors", e), dtype=float)


def max_norm(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _scan(x, i, theiler):
    d = np.max(np.abs(x - x[i]), axis=1)
    k = np.arange(len(x))
    d[np.abs(k - i) <= theiler] = np.inf
    return d


def brute_force_nn(e, i, theiler=0):
    """Exhaustive nearest neighbour of point ``i`` under the max norm.

    Candidates need ``|i - k| > theiler``; ties go to the smallest ``k``.
    Returns ``(k, distance)``.
    """
    x = _points(e)
    x = x[:, None] if x.ndim == 1 else x
    d = _scan(x, i, theiler)
    k = int(np.argmin(d))  # argmin returns the first minimum
    if not np.isfinite(d[k]):
        raise ValueError(f"no admissible neighbour for point {i} with theiler={theiler}")
    return k, float(d[k])


def brute_force_within(e, i, eps, theiler=0):
    """Exhaustive fixed-radius search; list of ``(k, distance)`` sorted by ``k``."""
    x = _points(e)
    x = x[:, None] if x.ndim == 1 else x
    d = _scan(x, i, theiler)
    ks = np.flatnonzero(d <= eps)
    return [(int(k), float(d[k])) for k in ks]
