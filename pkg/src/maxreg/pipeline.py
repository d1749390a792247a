"""From daily closing prices to unit Fréchet block-maxima pairs.

Steps: read ``Date``/``Close`` CSVs, take negative log returns, keep the
componentwise maximum per ISO-8601 week over the weeks present in both
series, then map each margin to the unit Fréchet scale with the empirical
CDF ``rank / (m + 1)``.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "DataError",
    "PriceSeries",
    "BlockMaximaSeries",
    "FrechetPairs",
    "MarginTransform",
    "read_price_csv",
    "negative_log_returns",
    "iso_week",
    "componentwise_block_maxima",
    "empirical_frechet_transform",
    "frechet_pairs",
    "write_pairs_csv",
    "write_sidecar",
    "read_pairs_csv",
    "PAIR_DIGITS",
]

log = logging.getLogger(__name__)

# 17 significant digits round-trip every float64 exactly
PAIR_DIGITS = 17
_MISSING = {"", "null", "nan", "na", "n/a", "none"}


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple
    closes: np.ndarray
    label: str = ""

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != closes.size:
            raise DataError("dates and closes differ in length")
        for i in range(1, len(self.dates)):
            if not self.dates[i] > self.dates[i - 1]:
                raise DataError(f"{self.label or 'series'}: dates not strictly increasing at row {i}")
        bad = np.flatnonzero(~(closes > 0))
        if bad.size:
            raise DataError(f"{self.label or 'series'}: non-positive price at row {int(bad[0])}")


@dataclass(frozen=True)
class BlockMaximaSeries:
    block_ids: tuple
    maxima: np.ndarray
    block_rule: str = "iso-week"


def read_price_csv(path, label: Optional[str] = None) -> PriceSeries:
    """Read a CSV with at least ``Date`` (``YYYY-MM-DD``) and ``Close`` columns.

    Rows with a missing close or zero volume (when a ``Volume`` column is
    present) are dropped and counted in the log.
    """
    path = Path(path)
    label = label or path.stem
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {c.strip().lower(): c for c in (reader.fieldnames or [])}
        if "date" not in cols or "close" not in cols:
            raise DataError(f"{path}: header must contain Date and Close")
        dates, closes, dropped = [], [], 0
        for row_no, row in enumerate(reader, start=2):
            close = (row[cols["close"]] or "").strip()
            vol = (row.get(cols.get("volume", ""), "") or "").strip()
            if close.lower() in _MISSING or (vol and vol.lower() not in _MISSING and float(vol) == 0.0):
                dropped += 1
                continue
            try:
                date = dt.date.fromisoformat(row[cols["date"]].strip())
                value = float(close)
            except ValueError as err:
                raise DataError(f"{path}: cannot parse row {row_no}: {err}") from err
            if not value > 0:
                raise DataError(f"{path}: non-positive price at row {row_no}")
            dates.append(date)
            closes.append(value)
    if dropped:
        log.info("%s: dropped %d rows with missing close or zero volume", label, dropped)
    if len(dates) < 2:
        raise DataError(f"{path}: fewer than two usable prices")
    return PriceSeries(tuple(dates), np.array(closes), label)


def negative_log_returns(series: PriceSeries) -> np.ndarray:
    """``r_t = -(log p_t - log p_{t-1})``, dated by ``series.dates[1:]``."""
    return -np.diff(np.log(series.closes))


def iso_week(date: dt.date) -> str:
    year, week, _ = date.isocalendar()
    return f"{year:04d}-W{week:02d}"


def _weekly_max(dates: Sequence[dt.date], values) -> dict:
    out: dict[str, float] = {}
    for d, v in zip(dates, np.asarray(values, dtype=float)):
        key = iso_week(d)
        out[key] = max(out.get(key, -math.inf), float(v))
    return out


def componentwise_block_maxima(a_dates, a_values, b_dates, b_values) -> tuple[BlockMaximaSeries, BlockMaximaSeries]:
    """Weekly maxima of two dated series over the ISO weeks they share."""
    wa, wb = _weekly_max(a_dates, a_values), _weekly_max(b_dates, b_values)
    common = sorted(set(wa) & set(wb))
    only = len(wa) + len(wb) - 2 * len(common)
    if only:
        log.info("dropped %d weeks present in only one series", only)
    if not common:
        raise DataError("the two series share no week")
    ids = tuple(common)
    return (BlockMaximaSeries(ids, np.array([wa[k] for k in ids])),
            BlockMaximaSeries(ids, np.array([wb[k] for k in ids])))


def empirical_frechet_transform(values) -> np.ndarray:
    """``-1 / log(rank / (m + 1))`` with average ranks for ties."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DataError("need at least two values")
    if not np.all(np.isfinite(v)):
        raise DataError("values must be finite")
    u = rankdata(v, method="average") / (v.size + 1.0)
    return -1.0 / np.log(u)


@dataclass
class MarginTransform:
    """Empirical CDF of one margin, for mapping between original and Fréchet scale.

    Knots are the distinct observed values with their average-rank CDF
    levels; both directions interpolate linearly and extrapolate flat with
    a warning.
    """

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.values = np.sort(np.asarray(self.values, dtype=float))
        if self.values.size < 2:
            raise DataError("need at least two values")
        levels = rankdata(self.values, method="average") / (self.values.size + 1.0)
        self._knots, first = np.unique(self.values, return_index=True)
        self._levels = levels[first]

    def _warn(self, what):
        warnings.warn(f"{self.label or 'margin'}: {what} outside observed range; extrapolating flat", stacklevel=3)

    def to_frechet(self, v):
        v = np.asarray(v, dtype=float)
        if np.any((v < self._knots[0]) | (v > self._knots[-1])):
            self._warn("value")
        u = np.interp(v, self._knots, self._levels)
        return -1.0 / np.log(u)

    def from_frechet(self, z):
        u = np.exp(-1.0 / np.asarray(z, dtype=float))
        if np.any((u < self._levels[0]) | (u > self._levels[-1])):
            self._warn("quantile level")
        return np.interp(u, self._levels, self._knots)


@dataclass
class FrechetPairs:
    """Paired weekly maxima on original and unit Fréchet scales."""

    block_ids: tuple
    raw_x: np.ndarray
    raw_y: np.ndarray
    x: np.ndarray
    y: np.ndarray
    labels: tuple = ("x", "y")
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.block_ids)

    @property
    def data(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def margins(self) -> tuple[MarginTransform, MarginTransform]:
        return MarginTransform(self.raw_x, self.labels[0]), MarginTransform(self.raw_y, self.labels[1])

    def sidecar(self) -> dict:
        return {
            "m": self.m,
            "week_rule": "ISO-8601 week of the return date; weeks missing in either series dropped",
            "tie_rule": "average ranks, normalised by m + 1",
            "labels": {"x": self.labels[0], "y": self.labels[1]},
            "first_block": self.block_ids[0],
            "last_block": self.block_ids[-1],
            "margins": {"x": sorted(map(float, self.raw_x)), "y": sorted(map(float, self.raw_y))},
            "digits": PAIR_DIGITS,
        }


def _ks_uniform(u: np.ndarray) -> float:
    u = np.sort(u)
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def frechet_pairs(series_x: PriceSeries, series_y: PriceSeries) -> FrechetPairs:
    """Full transform: returns, weekly maxima, empirical Fréchet margins."""
    rx, ry = negative_log_returns(series_x), negative_log_returns(series_y)
    bx, by = componentwise_block_maxima(series_x.dates[1:], rx, series_y.dates[1:], ry)
    x, y = empirical_frechet_transform(bx.maxima), empirical_frechet_transform(by.maxima)
    m = x.size
    for z in (x, y):
        # exp(-1/z) recovers rank/(m+1); a sanity check on the construction
        if _ks_uniform(np.exp(-1.0 / z)) > 1.36 / math.sqrt(m):
            raise DataError("empirical Fréchet transform failed its uniformity self-check")
    return FrechetPairs(bx.block_ids, bx.maxima, by.maxima, x, y, (series_x.label, series_y.label))


def write_pairs_csv(path, x, y, block_ids: Optional[Sequence[str]] = None) -> str:
    """Render ``x,y`` pairs (optionally with a block column) as CSV text and write it."""
    from .io import atomic_write_text

    lines = ["block,x,y" if block_ids is not None else "x,y"]
    for i, (a, b) in enumerate(zip(np.asarray(x, dtype=float), np.asarray(y, dtype=float))):
        row = f"{a:.{PAIR_DIGITS}g},{b:.{PAIR_DIGITS}g}"
        lines.append(f"{block_ids[i]},{row}" if block_ids is not None else row)
    text = "\n".join(lines) + "\n"
    atomic_write_text(path, text)
    return text


def write_sidecar(path, pairs: FrechetPairs):
    from .io import atomic_write_text

    atomic_write_text(path, json.dumps(pairs.sidecar(), indent=2, sort_keys=True) + "\n")


def read_pairs_csv(path) -> np.ndarray:
    """Read an ``x,y`` (or ``block,x,y``, or ``x1..xp,y``) CSV into an ``(n, d)`` array.

    Lines starting with ``#`` are comments. Any ``block`` column is ignored.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    keep = [i for i, h in enumerate(header) if h != "block"]
    if len(keep) < 2:
        raise DataError(f"{path}: need at least two numeric columns")
    try:
        data = np.array([[float(r[i]) for i in keep] for r in rows[1:]], dtype=float).reshape(-1, len(keep))
    except (ValueError, IndexError) as err:
        raise DataError(f"{path}: malformed row: {err}") from err
    if data.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    if not np.all(np.isfinite(data)) or np.any(data <= 0):
        raise DataError(f"{path}: Fréchet-scale values must be finite and positive")
    return data
