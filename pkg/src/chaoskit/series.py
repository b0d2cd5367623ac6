"""Price loading and the log-return transform."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DAYFIRST_FORMATS = ("%d.%m.%Y", "%d/%m/%Y", "%d-%m-%Y")


class SeriesError(ValueError):
    pass


@dataclass(frozen=True)
class PriceSeries:
    timestamps: tuple
    prices: np.ndarray
    label: str = ""
    rejected: int = 0

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        if prices.ndim != 1 or len(prices) < 2:
            raise SeriesError("a price series needs at least 2 observations")
        if len(self.timestamps) != len(prices):
            raise SeriesError("timestamps and prices differ in length")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise SeriesError("prices must be finite and strictly positive")
        ts = self.timestamps
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise SeriesError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.prices)


@dataclass(frozen=True)
class ReturnSeries:
    """A scalar observable, usually log returns of a :class:`PriceSeries`.

    ``sigma`` is the population standard deviation (divisor ``n``).
    """

    values: np.ndarray
    label: str = ""
    sigma: float = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise SeriesError("series must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise SeriesError("series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sigma", float(np.std(values)) if len(values) else 0.0)

    def __len__(self):
        return len(self.values)

    @property
    def n(self):
        return len(self.values)


def _parse_date(text, date_format=None, dayfirst=False):
    text = text.strip()
    if date_format:
        return datetime.strptime(text, date_format).date()
    try:
        return date.fromisoformat(text)
    except ValueError:
        if not dayfirst:
            raise
    for fmt in DAYFIRST_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            pass
    raise ValueError(f"unrecognised date {text!r}")


def load_csv(path, date_column="date", price_column="price", date_format=None,
             dayfirst=False, label=None) -> PriceSeries:
    """Read a price series from a CSV file with a header row.

    Rows with a missing, unparsable or non-positive price (or an unparsable
    date) are dropped; the number dropped is stored in ``rejected`` and
    logged. Rows are sorted by date. Duplicate dates are an error.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SeriesError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for col in (date_column, price_column):
            if col not in fields:
                raise SeriesError(f"{path}: column {col!r} not found (have {fields})")
        rows = []
        rejected = 0
        for row in reader:
            try:
                day = _parse_date(row[date_column] or "", date_format, dayfirst)
                price = float(row[price_column])
            except (TypeError, ValueError):
                rejected += 1
                continue
            if not np.isfinite(price) or price <= 0:
                rejected += 1
                continue
            rows.append((day, price))

    if rejected:
        logger.warning("%s: rejected %d row(s) with missing or invalid price/date", path, rejected)
    if not rows:
        raise SeriesError(f"{path}: no valid rows")
    rows.sort(key=lambda r: r[0])
    days = [r[0] for r in rows]
    dupes = sorted({a for a, b in zip(days, days[1:]) if a == b})
    if dupes:
        raise SeriesError(f"{path}: duplicate dates {', '.join(map(str, dupes[:5]))}")
    return PriceSeries(tuple(days), np.array([r[1] for r in rows]),
                       label=label or path.stem, rejected=rejected)


def load_values_csv(path, value_column="value", label=None) -> ReturnSeries:
    """Read an already-transformed scalar series (one value per row)."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SeriesError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if value_column not in (reader.fieldnames or []):
            raise SeriesError(f"{path}: column {value_column!r} not found")
        values = [float(row[value_column]) for row in reader]
    if not values:
        raise SeriesError(f"{path}: no valid rows")
    return ReturnSeries(np.array(values), label=label or path.stem)


def log_returns(p: PriceSeries) -> ReturnSeries:
    prices = p.prices
    if len(prices) < 2:
        raise SeriesError("need at least 2 prices")
    return ReturnSeries(np.log(prices[1:] / prices[:-1]), label=p.label)
