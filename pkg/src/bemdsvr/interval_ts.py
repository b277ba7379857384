"""Interval-valued time series: construction, representations and CSV I/O.

An interval series holds one ``[lower, upper]`` pair per calendar month.
Series are built from hourly demand records by taking, for one hour of the
day, the minimum and maximum over every month. They convert to
center/radius form, to natural-log scale and to the two complex-valued
constructions consumed by the bivariate decomposition::

    Trans1:  c_t = lower_t + i * upper_t
    Trans2:  c_t = upper_t + i * lower_t
"""

from __future__ import annotations

import csv
import datetime as dt
import warnings
from collections import defaultdict
from dataclasses import InitVar, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    MissingMonthError,
    NonPositiveBoundError,
    ScaleError,
    SchemaError,
)

RAW = "raw"
LOG = "natural-log"
SCALES = (RAW, LOG)

TRANS1 = "Trans1"
TRANS2 = "Trans2"
MODES = (TRANS1, TRANS2)

Period = tuple  # (year, month)


def next_period(period, k=1):
    """Return the (year, month) label ``k`` months after ``period``."""
    year, month = period
    idx = year * 12 + (month - 1) + k
    return (idx // 12, idx % 12 + 1)


def period_range(start, n):
    return tuple(next_period(start, k) for k in range(n))


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarRecord:
    date: dt.date
    hour: int
    value: float

    def __post_init__(self):
        if not 1 <= self.hour <= 24:
            raise SchemaError(f"hour must be in 1..24, got {self.hour}")
        if not self.value > 0:
            raise SchemaError(f"demand must be positive, got {self.value}")


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"invalid interval [{self.lower}, {self.upper}]")

    @property
    def center(self):
        return (self.lower + self.upper) / 2

    @property
    def radius(self):
        return (self.upper - self.lower) / 2


def to_center_radius(iv: Interval) -> tuple[float, float]:
    return iv.center, iv.radius


def from_center_radius(center: float, radius: float) -> Interval:
    return Interval(center - radius, center + radius)


@dataclass(frozen=True)
class IntervalSeries:
    """Monthly interval series.

    ``lower`` and ``upper`` are read-only float arrays. ``hour`` is metadata
    identifying which hour-of-day the series was aggregated for, if any.
    Passing ``check=False`` skips the ``lower <= upper`` check; it exists so
    that bound recovery can hand back an invalid series for inspection.
    """

    periods: tuple
    lower: np.ndarray
    upper: np.ndarray
    scale: str = RAW
    hour: int | None = None
    check: InitVar[bool] = True

    def __post_init__(self, check):
        object.__setattr__(self, "periods", tuple(tuple(p) for p in self.periods))
        object.__setattr__(self, "lower", _frozen(self.lower))
        object.__setattr__(self, "upper", _frozen(self.upper))
        n = len(self.periods)
        if n < 1:
            raise EmptyInputError("interval series must have at least one period")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bounds must be 1-d and match the number of periods")
        if self.scale not in SCALES:
            raise ValueError(f"unknown scale {self.scale!r}")
        for a, b in zip(self.periods, self.periods[1:]):
            if next_period(a) != tuple(b):
                raise ValueError(f"periods must be contiguous months, got {a} then {b}")
        if check:
            bad = np.flatnonzero(~(self.lower <= self.upper))
            if bad.size:
                raise ValueError(f"lower > upper at indices {bad.tolist()}")

    @classmethod
    def from_bounds(cls, lower, upper, start=(2000, 1), scale=RAW, hour=None):
        return cls(period_range(start, len(lower)), lower, upper, scale, hour)

    def __len__(self):
        return len(self.periods)

    def __getitem__(self, i) -> Interval:
        return Interval(float(self.lower[i]), float(self.upper[i]))

    @property
    def center(self):
        return (self.lower + self.upper) / 2

    @property
    def radius(self):
        return (self.upper - self.lower) / 2

    @property
    def range(self):
        return self.upper - self.lower

    @property
    def intervals(self):
        return [self[i] for i in range(len(self))]

    def head(self, n):
        """First ``n`` periods."""
        return IntervalSeries(
            self.periods[:n], self.lower[:n], self.upper[:n], self.scale, self.hour
        )

    def with_bounds(self, lower, upper, check=True):
        return IntervalSeries(self.periods, lower, upper, self.scale, self.hour, check)

    def __eq__(self, other):
        if not isinstance(other, IntervalSeries):
            return NotImplemented
        return (
            self.periods == other.periods
            and self.scale == other.scale
            and self.hour == other.hour
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    __hash__ = None


@dataclass(frozen=True)
class ComplexSeries:
    samples: np.ndarray
    construction: str
    periods: tuple = ()
    scale: str = RAW
    hour: int | None = None

    def __post_init__(self):
        if self.construction not in MODES:
            raise ValueError(f"unknown construction {self.construction!r}")
        object.__setattr__(self, "samples", _frozen(self.samples, complex))

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class RecoveredBounds:
    series: IntervalSeries
    invalid: tuple = field(default=())

    @property
    def valid(self):
        return not self.invalid


def aggregate_to_intervals(
    records: Iterable[ScalarRecord], hour: int, min_count: int = 20
) -> IntervalSeries:
    """Monthly [min, max] of the records observed at ``hour``.

    Months with fewer than ``min_count`` records still yield an interval but
    emit a ``UserWarning``. A calendar month with no record at all inside the
    covered span raises ``MissingMonthError``.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no demand records")
    groups = defaultdict(list)
    for r in records:
        if r.hour == hour:
            groups[(r.date.year, r.date.month)].append(r.value)
    if not groups:
        raise EmptyInputError(f"no demand records for hour {hour}")
    first, last = min(groups), max(groups)
    periods = []
    p = first
    while p <= last:
        if p not in groups:
            raise MissingMonthError(p[0], p[1], hour)
        periods.append(p)
        p = next_period(p)
    for p in periods:
        if len(groups[p]) < min_count:
            warnings.warn(
                f"hour {hour}, {p[0]:04d}-{p[1]:02d}: only {len(groups[p])} records",
                stacklevel=2,
            )
    lower = [min(groups[p]) for p in periods]
    upper = [max(groups[p]) for p in periods]
    return IntervalSeries(tuple(periods), lower, upper, RAW, hour)


def log_transform(s: IntervalSeries) -> IntervalSeries:
    if s.scale == LOG:
        raise ScaleError("series is already on natural-log scale")
    if np.any(s.lower <= 0) or np.any(s.upper <= 0):
        raise NonPositiveBoundError("log transform needs strictly positive bounds")
    return IntervalSeries(s.periods, np.log(s.lower), np.log(s.upper), LOG, s.hour)


def inverse_log(s: IntervalSeries) -> IntervalSeries:
    if s.scale != LOG:
        raise ScaleError("series is not on natural-log scale")
    return IntervalSeries(s.periods, np.exp(s.lower), np.exp(s.upper), RAW, s.hour)


def to_complex(s: IntervalSeries, mode: str = TRANS1) -> ComplexSeries:
    if mode == TRANS1:
        c = s.lower + 1j * s.upper
    elif mode == TRANS2:
        c = s.upper + 1j * s.lower
    else:
        raise ValueError(f"unknown construction {mode!r}")
    return ComplexSeries(c, mode, s.periods, s.scale, s.hour)


def split_complex(samples, mode):
    """(lower, upper) read back from complex samples built with ``mode``."""
    samples = np.asarray(samples)
    if mode == TRANS1:
        return samples.real.copy(), samples.imag.copy()
    if mode == TRANS2:
        return samples.imag.copy(), samples.real.copy()
    raise ValueError(f"unknown construction {mode!r}")


def from_complex(c: ComplexSeries) -> RecoveredBounds:
    lower, upper = split_complex(c.samples, c.construction)
    periods = c.periods or period_range((2000, 1), len(c))
    invalid = tuple(np.flatnonzero(~(lower <= upper)).tolist())
    series = IntervalSeries(periods, lower, upper, c.scale, c.hour, check=False)
    return RecoveredBounds(series, invalid)


# CSV I/O

DEMAND_COLUMNS = ("date", "hour", "demand_mwh")
INTERVAL_COLUMNS = ("year", "month", "hour", "lower", "upper")


def fmt(x) -> str:
    """Shortest decimal that round-trips to the same float."""
    return repr(float(x))


def read_demand_csv(path) -> list[ScalarRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DEMAND_COLUMNS:
            raise SchemaError(f"expected header {','.join(DEMAND_COLUMNS)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"expected 3 columns, got {len(row)}", line=lineno)
            try:
                date = dt.date.fromisoformat(row[0].strip())
                hour = int(row[1])
                value = float(row[2])
            except ValueError as exc:
                raise SchemaError(str(exc), line=lineno) from None
            if not 1 <= hour <= 24:
                raise SchemaError(f"hour {hour} outside 1..24", line=lineno)
            if not (np.isfinite(value) and value > 0):
                raise SchemaError(f"demand {row[2]!r} is not a positive number", line=lineno)
            records.append(ScalarRecord(date, hour, value))
    return records


def write_interval_csv(series: IntervalSeries | Sequence[IntervalSeries], path):
    if isinstance(series, IntervalSeries):
        series = [series]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTERVAL_COLUMNS)
        for s in series:
            hour = "" if s.hour is None else s.hour
            for (y, m), lo, up in zip(s.periods, s.lower, s.upper):
                w.writerow([y, m, hour, fmt(lo), fmt(up)])


def read_interval_csv(path, scale: str = RAW) -> dict:
    """Read an interval-series CSV into ``{hour: IntervalSeries}``.

    Rows without an hour are grouped under ``None``. The file format does not
    carry the scale, so the caller states it.
    """
    rows = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != INTERVAL_COLUMNS:
            raise SchemaError(f"expected header {','.join(INTERVAL_COLUMNS)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise SchemaError(f"expected 5 columns, got {len(row)}", line=lineno)
            try:
                hour = int(row[2]) if row[2].strip() else None
                rows[hour].append(((int(row[0]), int(row[1])), float(row[3]), float(row[4])))
            except ValueError as exc:
                raise SchemaError(str(exc), line=lineno) from None
    out = {}
    for hour, items in rows.items():
        items.sort(key=lambda r: r[0])
        periods = [r[0] for r in items]
        try:
            out[hour] = IntervalSeries(
                tuple(periods), [r[1] for r in items], [r[2] for r in items], scale, hour
            )
        except ValueError as exc:
            raise SchemaError(f"hour {hour}: {exc}") from None
    return out


def read_interval_series(path, scale: str = RAW, hour=None) -> IntervalSeries:
    """Read a single series; ``hour`` picks one when the file holds several."""
    series = read_interval_csv(path, scale)
    if hour is not None:
        if hour not in series:
            raise SchemaError(f"{path}: no rows for hour {hour}")
        return series[hour]
    if len(series) != 1:
        raise SchemaError(f"{path}: holds {len(series)} series, pick an hour")
    return next(iter(series.values()))
